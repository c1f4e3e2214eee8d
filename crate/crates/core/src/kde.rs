//! Two-dimensional Gaussian kernel density estimation with boundary
//! reflection, producing node masses on a [`SkillGrid`].
//!
//! The rectangular domain is the union of the grid cells (axis cells split at
//! coordinate midpoints). Mass leaking past an edge is folded back by
//! mirroring every sample across all four edges, so a point sitting in a
//! corner still contributes its full weight.

use crate::error::{Error, Result};
use crate::grid::SkillGrid;
use crate::stats::normal_cdf;

/// A weighted sample point in skill space.
#[derive(Debug, Clone, Copy)]
pub struct SamplePoint {
    pub alpha_c: f64,
    pub alpha_m: f64,
    pub weight: f64,
}

/// Cell boundaries of a strictly increasing coordinate axis.
fn cell_bounds(coords: &[f64]) -> Vec<f64> {
    let n = coords.len();
    let mut b = Vec::with_capacity(n + 1);
    if n == 1 {
        // Degenerate axis: a nominal unit-width cell.
        b.push(coords[0] - 0.5);
        b.push(coords[0] + 0.5);
        return b;
    }
    b.push(coords[0] - (coords[1] - coords[0]) / 2.0);
    for i in 1..n {
        b.push((coords[i - 1] + coords[i]) / 2.0);
    }
    b.push(coords[n - 1] + (coords[n - 1] - coords[n - 2]) / 2.0);
    b
}

/// Integrated kernel mass per axis cell for one sample coordinate, summed
/// over the original position and, when `reflect` is set, its mirror images
/// across both domain edges.
fn axis_cell_masses(bounds: &[f64], mu: f64, h: f64, reflect: bool) -> Vec<f64> {
    let lo = bounds[0];
    let hi = bounds[bounds.len() - 1];
    let centers: &[f64] = if reflect {
        &[mu, 2.0 * lo - mu, 2.0 * hi - mu]
    } else {
        &[mu]
    };
    let mut masses = vec![0.0; bounds.len() - 1];
    for &c in centers.iter() {
        let mut prev = normal_cdf((bounds[0] - c) / h);
        for (k, &b) in bounds.iter().skip(1).enumerate() {
            let cur = normal_cdf((b - c) / h);
            masses[k] += cur - prev;
            prev = cur;
        }
    }
    masses
}

/// Unnormalized node masses of the product-kernel estimate and their total.
///
/// With `reflect` the total approaches the total sample weight; without it,
/// mass near the edges leaks out of the domain. Exposed so callers can
/// quantify the boundary correction.
pub fn kde_raw(
    points: &[SamplePoint],
    grid: &SkillGrid,
    bandwidth: (f64, f64),
    reflect: bool,
) -> Result<(Vec<f64>, f64)> {
    if points.is_empty() {
        return Err(Error::Argument("kernel density needs at least one point".into()));
    }
    let (h_c, h_m) = bandwidth;
    if !(h_c > 0.0) || !(h_m > 0.0) {
        return Err(Error::Argument(format!(
            "bandwidths must be positive, got ({h_c}, {h_m})"
        )));
    }
    let bc = cell_bounds(&grid.alpha_c);
    let bm = cell_bounds(&grid.alpha_m);
    let mut mass = vec![0.0; grid.node_count()];
    for pt in points {
        if !(pt.weight >= 0.0) {
            return Err(Error::Argument(format!(
                "sample weights must be >= 0, got {}",
                pt.weight
            )));
        }
        if pt.weight == 0.0 {
            continue;
        }
        let mc = axis_cell_masses(&bc, pt.alpha_c, h_c, reflect);
        let mm = axis_cell_masses(&bm, pt.alpha_m, h_m, reflect);
        for (i, &wc) in mc.iter().enumerate() {
            let row = i * grid.n_m;
            for (j, &wm) in mm.iter().enumerate() {
                mass[row + j] += pt.weight * wc * wm;
            }
        }
    }
    let total: f64 = mass.iter().sum();
    Ok((mass, total))
}

/// Boundary-reflected Gaussian product-kernel density, normalized so the
/// node masses sum to one.
pub fn kde_smooth(
    points: &[SamplePoint],
    grid: &SkillGrid,
    bandwidth: (f64, f64),
) -> Result<Vec<f64>> {
    let (mut mass, total) = kde_raw(points, grid, bandwidth, true)?;
    if !(total > 0.0) {
        return Err(Error::Numeric(
            "kernel density collapsed to zero total mass".into(),
        ));
    }
    for m in &mut mass {
        *m /= total;
    }
    Ok(mass)
}
