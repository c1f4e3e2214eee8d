//! Per-node allocations in utility coordinates and lattice diagnostics on
//! the implied indirect utility.

use crate::error::{Error, Result};
use crate::grid::SkillGrid;
use crate::params::ModelParams;

/// Per-type allocation in utility coordinates: consumption utility `c`, task
/// disutilities `x_c`, `x_m` (each equal to the physical task level raised to
/// the power rho), and the assigned project value `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationField {
    pub n_c: usize,
    pub n_m: usize,
    pub c: Vec<f64>,
    pub x_c: Vec<f64>,
    pub x_m: Vec<f64>,
    pub z: Vec<f64>,
}

impl AllocationField {
    pub fn new(
        n_c: usize,
        n_m: usize,
        c: Vec<f64>,
        x_c: Vec<f64>,
        x_m: Vec<f64>,
        z: Vec<f64>,
    ) -> Result<Self> {
        let n = n_c * n_m;
        for (name, v) in [("c", &c), ("x_c", &x_c), ("x_m", &x_m), ("z", &z)] {
            if v.len() != n {
                return Err(Error::Argument(format!(
                    "{name} has {} entries, expected {n}",
                    v.len()
                )));
            }
        }
        for &x in x_c.iter().chain(x_m.iter()) {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::Argument(format!(
                    "task disutilities must be >= 0 and finite, got {x}"
                )));
            }
        }
        for &v in z.iter() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!(
                    "project values must be > 0 and finite, got {v}"
                )));
            }
        }
        Ok(AllocationField {
            n_c,
            n_m,
            c,
            x_c,
            x_m,
            z,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n_c * self.n_m
    }

    /// Physical task level for task s at a node: `x_util^(1/rho)`.
    pub fn x_phys(&self, x_util: f64, params: &ModelParams) -> f64 {
        x_util.powf(1.0 / params.rho)
    }
}

/// Node-wise indirect utility `u(p) = c - p_c x_c - p_m x_m`.
pub fn indirect_utility_field(alloc: &AllocationField, grid: &SkillGrid) -> Result<Vec<f64>> {
    if alloc.n_c != grid.n_c || alloc.n_m != grid.n_m {
        return Err(Error::Argument(format!(
            "allocation is {}x{} but grid is {}x{}",
            alloc.n_c, alloc.n_m, grid.n_c, grid.n_m
        )));
    }
    let mut u = Vec::with_capacity(grid.node_count());
    for idx in 0..grid.node_count() {
        let (pc, pm) = grid.p(idx);
        u.push(alloc.c[idx] - pc * alloc.x_c[idx] - pm * alloc.x_m[idx]);
    }
    Ok(u)
}

/// A failed lattice convexity or monotonicity condition.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexityViolation {
    /// `u` rises above the chord of a collinear triple centred at `node`.
    Midpoint {
        node: usize,
        offset: (isize, isize),
        gap: f64,
    },
    /// `u` increases in `p` along an axis step starting at `node`.
    Monotone { node: usize, axis: usize, gap: f64 },
}

/// Check that `u` is convex and non-increasing in `p` on the lattice.
///
/// For every node and every primitive lattice offset whose triple
/// `(q-d, q, q+d)` is collinear in p-space, the chord condition
/// `u(q) <= (1-th) u(q-d) + th u(q+d) + tol` is verified, with `th` the
/// collinearity parameter (1/2 on uniformly spaced lattices). Monotonicity is
/// checked along both axes. Returns the list of violations; an incentive
/// compatible allocation produces an empty list.
pub fn discrete_convexity_check(
    u: &[f64],
    grid: &SkillGrid,
    tol: f64,
) -> Result<Vec<ConvexityViolation>> {
    if u.len() != grid.node_count() {
        return Err(Error::Argument(format!(
            "utility field has {} entries, expected {}",
            u.len(),
            grid.node_count()
        )));
    }
    let mut viols = Vec::new();
    let (nc, nm) = (grid.n_c as isize, grid.n_m as isize);

    // Monotonicity: p decreases as the index grows, and u must be
    // non-increasing in p, i.e. non-decreasing in the index.
    for i in 0..grid.n_c {
        for j in 0..grid.n_m {
            let q = grid.index(i, j);
            if i + 1 < grid.n_c {
                let r = grid.index(i + 1, j);
                if u[r] < u[q] - tol {
                    viols.push(ConvexityViolation::Monotone {
                        node: q,
                        axis: 0,
                        gap: u[q] - u[r],
                    });
                }
            }
            if j + 1 < grid.n_m {
                let r = grid.index(i, j + 1);
                if u[r] < u[q] - tol {
                    viols.push(ConvexityViolation::Monotone {
                        node: q,
                        axis: 1,
                        gap: u[q] - u[r],
                    });
                }
            }
        }
    }

    // Midpoint condition over collinear triples.
    let max_a = (grid.n_c - 1) / 2;
    let max_b = (grid.n_m - 1) / 2;
    for a in 0..=(max_a as isize) {
        for b in -(max_b as isize)..=(max_b as isize) {
            if a == 0 && b <= 0 {
                continue;
            }
            if gcd(a.unsigned_abs(), b.unsigned_abs()) != 1 {
                continue;
            }
            let b_abs = b.unsigned_abs() as isize;
            for i in a..(nc - a) {
                for j in b_abs..(nm - b_abs) {
                    let lo = grid.index((i - a) as usize, (j - b) as usize);
                    let q = grid.index(i as usize, j as usize);
                    let hi = grid.index((i + a) as usize, (j + b) as usize);
                    let theta = match collinearity_parameter(grid, lo, q, hi) {
                        Some(t) => t,
                        None => continue,
                    };
                    let chord = (1.0 - theta) * u[lo] + theta * u[hi];
                    if u[q] > chord + tol {
                        viols.push(ConvexityViolation::Midpoint {
                            node: q,
                            offset: (a, b),
                            gap: u[q] - chord,
                        });
                    }
                }
            }
        }
    }
    Ok(viols)
}

/// If the p-space points of nodes `lo < q < hi` are collinear, return `theta`
/// with `p(q) = (1-theta) p(lo) + theta p(hi)`.
fn collinearity_parameter(grid: &SkillGrid, lo: usize, q: usize, hi: usize) -> Option<f64> {
    let (alo, blo) = grid.p(lo);
    let (aq, bq) = grid.p(q);
    let (ahi, bhi) = grid.p(hi);
    let dc = ahi - alo;
    let dm = bhi - blo;
    let tc = if dc.abs() > 0.0 {
        Some((aq - alo) / dc)
    } else {
        None
    };
    let tm = if dm.abs() > 0.0 {
        Some((bq - blo) / dm)
    } else {
        None
    };
    match (tc, tm) {
        (Some(t1), Some(t2)) => {
            if (t1 - t2).abs() <= 1e-9 * (1.0 + t1.abs().max(t2.abs())) {
                Some(0.5 * (t1 + t2))
            } else {
                None
            }
        }
        (Some(t), None) | (None, Some(t)) => Some(t),
        (None, None) => None,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
