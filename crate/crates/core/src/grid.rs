//! Rectangular lattice of worker types and the coordinate transform between
//! skill space (alpha) and parameter space (p).
//!
//! Every module in the crate shares the row-major node indexing
//! `index = i_c * n_m + i_m`.

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Map a skill coordinate to its parameter coordinate, `p = kappa * alpha^(-rho)`.
///
/// Strictly decreasing in `alpha`.
pub fn alpha_to_p(alpha_s: f64, params: &ModelParams) -> Result<f64> {
    if !(alpha_s > 0.0) || !alpha_s.is_finite() {
        return Err(Error::Domain(format!(
            "skill must be positive and finite, got {alpha_s}"
        )));
    }
    Ok(params.kappa * alpha_s.powf(-params.rho))
}

/// Inverse transform, `alpha = (kappa / p)^(1/rho)`.
pub fn p_to_alpha(p_s: f64, params: &ModelParams) -> Result<f64> {
    if !(p_s > 0.0) || !p_s.is_finite() {
        return Err(Error::Domain(format!(
            "parameter must be positive and finite, got {p_s}"
        )));
    }
    Ok((params.kappa / p_s).powf(1.0 / params.rho))
}

/// How the skill coordinates of a grid axis are spaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpacing {
    /// Equal steps in alpha.
    Uniform,
    /// Equal ratios in alpha.
    Geometric,
}

/// Rectangular lattice of worker types with a probability mass per node.
///
/// The parameter coordinates are always derived from the skill coordinates,
/// never specified independently, so `p = kappa * alpha^(-rho)` holds exactly
/// at every node.
#[derive(Debug, Clone)]
pub struct SkillGrid {
    pub n_c: usize,
    pub n_m: usize,
    /// Strictly increasing skill coordinates per axis.
    pub alpha_c: Vec<f64>,
    pub alpha_m: Vec<f64>,
    /// Derived parameter coordinates (strictly decreasing in alpha).
    pub p_c: Vec<f64>,
    pub p_m: Vec<f64>,
    /// Probability mass per node, row-major, summing to 1.
    pub density: Vec<f64>,
}

impl SkillGrid {
    /// Build a grid from explicit skill coordinate vectors and node masses.
    pub fn new(
        alpha_c: Vec<f64>,
        alpha_m: Vec<f64>,
        density: Vec<f64>,
        params: &ModelParams,
    ) -> Result<Self> {
        let n_c = alpha_c.len();
        let n_m = alpha_m.len();
        if n_c == 0 || n_m == 0 {
            return Err(Error::Argument("grid axes must be non-empty".into()));
        }
        if density.len() != n_c * n_m {
            return Err(Error::Argument(format!(
                "density has {} entries, expected {}",
                density.len(),
                n_c * n_m
            )));
        }
        for axis in [&alpha_c, &alpha_m] {
            for w in axis.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::Argument(
                        "skill coordinates must be strictly increasing".into(),
                    ));
                }
            }
        }
        let mut total = 0.0;
        for &m in &density {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Argument(format!("node mass must be >= 0, got {m}")));
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "node masses must sum to 1 within 1e-12, got {total}"
            )));
        }
        let p_c = alpha_c
            .iter()
            .map(|&a| alpha_to_p(a, params))
            .collect::<Result<Vec<_>>>()?;
        let p_m = alpha_m
            .iter()
            .map(|&a| alpha_to_p(a, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(SkillGrid {
            n_c,
            n_m,
            alpha_c,
            alpha_m,
            p_c,
            p_m,
            density,
        })
    }

    /// Regular grid over `[lo_c, hi_c] x [lo_m, hi_m]` with the given spacing
    /// and uniform node masses.
    pub fn regular(
        (n_c, n_m): (usize, usize),
        (lo_c, hi_c): (f64, f64),
        (lo_m, hi_m): (f64, f64),
        spacing: GridSpacing,
        params: &ModelParams,
    ) -> Result<Self> {
        let alpha_c = axis_coords(n_c, lo_c, hi_c, spacing)?;
        let alpha_m = axis_coords(n_m, lo_m, hi_m, spacing)?;
        let n = n_c * n_m;
        let density = vec![1.0 / n as f64; n];
        SkillGrid::new(alpha_c, alpha_m, density, params)
    }

    /// Replace the node masses, revalidating nonnegativity and normalization.
    pub fn with_density(&self, density: Vec<f64>) -> Result<Self> {
        let mut g = self.clone();
        if density.len() != self.node_count() {
            return Err(Error::Argument(format!(
                "density has {} entries, expected {}",
                density.len(),
                self.node_count()
            )));
        }
        let mut total = 0.0;
        for &m in &density {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Argument(format!("node mass must be >= 0, got {m}")));
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "node masses must sum to 1 within 1e-12, got {total}"
            )));
        }
        g.density = density;
        Ok(g)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n_c * self.n_m
    }

    /// Row-major node index.
    #[inline]
    pub fn index(&self, i_c: usize, i_m: usize) -> usize {
        i_c * self.n_m + i_m
    }

    /// Inverse of [`SkillGrid::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_m, idx % self.n_m)
    }

    /// Parameter coordinates of a node.
    #[inline]
    pub fn p(&self, idx: usize) -> (f64, f64) {
        let (i_c, i_m) = self.coords(idx);
        (self.p_c[i_c], self.p_m[i_m])
    }

    /// Skill coordinates of a node.
    #[inline]
    pub fn alpha(&self, idx: usize) -> (f64, f64) {
        let (i_c, i_m) = self.coords(idx);
        (self.alpha_c[i_c], self.alpha_m[i_m])
    }

    #[inline]
    pub fn mass(&self, idx: usize) -> f64 {
        self.density[idx]
    }

    /// Cell widths in p-space around each coordinate of an axis (half the
    /// distance to each neighbour, full distance at the edges). Used to turn
    /// node masses into densities for finite-difference diagnostics.
    pub fn p_cell_widths(p: &[f64]) -> Vec<f64> {
        let n = p.len();
        if n == 1 {
            return vec![1.0];
        }
        let mut w = vec![0.0; n];
        for i in 0..n {
            let left = if i == 0 {
                (p[1] - p[0]).abs() / 2.0
            } else {
                (p[i] - p[i - 1]).abs() / 2.0
            };
            let right = if i + 1 == n {
                (p[n - 1] - p[n - 2]).abs() / 2.0
            } else {
                (p[i + 1] - p[i]).abs() / 2.0
            };
            w[i] = left + right;
        }
        w
    }
}

fn axis_coords(n: usize, lo: f64, hi: f64, spacing: GridSpacing) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Argument("axis size must be positive".into()));
    }
    if !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::Argument(format!(
            "axis range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if n == 1 {
        return Ok(vec![(lo + hi) / 2.0]);
    }
    let mut v = Vec::with_capacity(n);
    match spacing {
        GridSpacing::Uniform => {
            let step = (hi - lo) / (n - 1) as f64;
            for i in 0..n {
                v.push(lo + step * i as f64);
            }
        }
        GridSpacing::Geometric => {
            let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
            let mut x = lo;
            for _ in 0..n {
                v.push(x);
                x *= ratio;
            }
        }
    }
    // Pin the endpoints exactly.
    v[0] = lo;
    v[n - 1] = hi;
    Ok(v)
}
