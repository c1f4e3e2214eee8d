//! Euler-Lagrange residuals of the pointwise optimality condition and the
//! residual-based bunching predictor.
//!
//! In separated regions the condition
//! `pi (C'(c) - lambda) = d/dp_c g_c + d/dp_m g_m` holds, where
//! `g_s = -pi (z X'(x_s) + p_s C'(c))` is the wedge-weighted marginal term;
//! where it fails, the type is bunched. Derivatives are central differences
//! in p with nonuniform-spacing weights; boundary nodes are excluded.

use crate::cost::CostFunctions;
use crate::error::{Error, Result};
use crate::field::AllocationField;
use crate::grid::SkillGrid;
use crate::params::ModelParams;
use crate::stats::percentile;

/// Per-node Euler-Lagrange residual classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElResidual {
    /// Interior node with a finite residual.
    Value(f64),
    /// A stencil node has a zero task level, so the marginal term diverges;
    /// treated as an infinite residual.
    Singular,
    /// Boundary node (or an axis too short to difference); excluded from
    /// diagnostics.
    Boundary,
}

impl ElResidual {
    pub fn value(&self) -> Option<f64> {
        match self {
            ElResidual::Value(v) => Some(*v),
            _ => None,
        }
    }
}

/// Central difference with nonuniform spacing.
fn central_diff(f_lo: f64, f_mid: f64, f_hi: f64, h_l: f64, h_r: f64) -> f64 {
    (h_l * h_l * f_hi - h_r * h_r * f_lo + (h_r * h_r - h_l * h_l) * f_mid)
        / (h_l * h_r * (h_l + h_r))
}

/// Euler-Lagrange residual per node. Axes of size one contribute no
/// derivative; an axis of size two cannot be centrally differenced and is
/// rejected.
pub fn el_residual(
    alloc: &AllocationField,
    grid: &SkillGrid,
    lambda: f64,
    params: &ModelParams,
    costs: &CostFunctions,
) -> Result<Vec<ElResidual>> {
    if alloc.n_c != grid.n_c || alloc.n_m != grid.n_m {
        return Err(Error::Argument("allocation and grid shapes differ".into()));
    }
    let active_c = grid.n_c >= 2;
    let active_m = grid.n_m >= 2;
    if (active_c && grid.n_c < 3) || (active_m && grid.n_m < 3) || (!active_c && !active_m) {
        return Err(Error::Argument(
            "central differences need at least 3 nodes on every active axis".into(),
        ));
    }
    let n = grid.node_count();
    let w_c = SkillGrid::p_cell_widths(&grid.p_c);
    let w_m = SkillGrid::p_cell_widths(&grid.p_m);
    let _ = params;

    // Node densities in p-space and the marginal terms g_s. A zero task
    // level makes X' diverge; mark it.
    let mut dens = vec![0.0; n];
    let mut g_c = vec![f64::NAN; n];
    let mut g_m = vec![f64::NAN; n];
    let mut singular = vec![false; n];
    for idx in 0..n {
        let (i, j) = grid.coords(idx);
        let d = grid.mass(idx) / (w_c[i] * w_m[j]);
        dens[idx] = d;
        let (pc, pm) = grid.p(idx);
        let cp = costs.consumption.deriv(alloc.c[idx]);
        if alloc.x_c[idx] > 0.0 {
            g_c[idx] = -d * (alloc.z[idx] * costs.task.deriv(alloc.x_c[idx]) + pc * cp);
        } else {
            singular[idx] = true;
        }
        if alloc.x_m[idx] > 0.0 {
            g_m[idx] = -d * (alloc.z[idx] * costs.task.deriv(alloc.x_m[idx]) + pm * cp);
        } else {
            singular[idx] = true;
        }
    }

    let mut out = vec![ElResidual::Boundary; n];
    for idx in 0..n {
        let (i, j) = grid.coords(idx);
        let interior_c = !active_c || (i >= 1 && i + 1 < grid.n_c);
        let interior_m = !active_m || (j >= 1 && j + 1 < grid.n_m);
        if !interior_c || !interior_m {
            continue;
        }
        // Whole stencil must be regular.
        let mut stencil_singular = singular[idx];
        if active_c {
            stencil_singular |= singular[grid.index(i - 1, j)] || singular[grid.index(i + 1, j)];
        }
        if active_m {
            stencil_singular |= singular[grid.index(i, j - 1)] || singular[grid.index(i, j + 1)];
        }
        if stencil_singular {
            out[idx] = ElResidual::Singular;
            continue;
        }
        let mut divergence = 0.0;
        if active_c {
            let h_l = grid.p_c[i] - grid.p_c[i - 1];
            let h_r = grid.p_c[i + 1] - grid.p_c[i];
            divergence += central_diff(
                g_c[grid.index(i - 1, j)],
                g_c[idx],
                g_c[grid.index(i + 1, j)],
                h_l,
                h_r,
            );
        }
        if active_m {
            let h_l = grid.p_m[j] - grid.p_m[j - 1];
            let h_r = grid.p_m[j + 1] - grid.p_m[j];
            divergence += central_diff(
                g_m[grid.index(i, j - 1)],
                g_m[idx],
                g_m[grid.index(i, j + 1)],
                h_l,
                h_r,
            );
        }
        let lhs = dens[idx] * (costs.consumption.deriv(alloc.c[idx]) - lambda);
        out[idx] = ElResidual::Value(lhs - divergence);
    }
    Ok(out)
}

/// Threshold selection for the residual-based bunching predictor.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdPolicy {
    Absolute(f64),
    /// Quantile of the benchmark-mode residual magnitudes times a
    /// multiplier; the benchmark residuals capture pure discretization
    /// noise.
    BenchmarkQuantile { quantile: f64, multiplier: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::BenchmarkQuantile {
            quantile: 95.0,
            multiplier: 5.0,
        }
    }
}

/// Agreement between residual-predicted and allocation-detected bunching.
#[derive(Debug, Clone)]
pub struct ConcordanceReport {
    pub threshold: f64,
    pub predicted: Vec<bool>,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    /// Fraction of compared (interior) nodes where both flags agree.
    pub agreement: f64,
    pub compared: usize,
}

/// Flag nodes whose residual magnitude exceeds the threshold and compare
/// with the allocation-based flags. Boundary nodes are excluded; singular
/// nodes count as infinite residuals.
pub fn bunched_via_el(
    residuals: &[ElResidual],
    actual_flags: &[bool],
    policy: ThresholdPolicy,
    benchmark_residuals: Option<&[ElResidual]>,
) -> Result<ConcordanceReport> {
    if residuals.len() != actual_flags.len() {
        return Err(Error::Argument("residuals and flags differ in length".into()));
    }
    let threshold = match policy {
        ThresholdPolicy::Absolute(v) => v,
        ThresholdPolicy::BenchmarkQuantile {
            quantile,
            multiplier,
        } => {
            let bench = benchmark_residuals.ok_or_else(|| {
                Error::Argument(
                    "the benchmark-quantile policy needs benchmark-mode residuals".into(),
                )
            })?;
            let mags: Vec<f64> = bench
                .iter()
                .filter_map(|r| r.value().map(f64::abs))
                .collect();
            if mags.is_empty() {
                return Err(Error::Argument(
                    "benchmark residuals have no interior values".into(),
                ));
            }
            percentile(&mags, quantile)? * multiplier
        }
    };
    let mut predicted = vec![false; residuals.len()];
    let (mut tp, mut fp, mut fnn, mut tn) = (0usize, 0usize, 0usize, 0usize);
    let mut compared = 0usize;
    for (idx, r) in residuals.iter().enumerate() {
        let pred = match r {
            ElResidual::Boundary => continue,
            ElResidual::Singular => f64::INFINITY > threshold,
            ElResidual::Value(v) => v.abs() > threshold,
        };
        predicted[idx] = pred;
        compared += 1;
        match (pred, actual_flags[idx]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => tn += 1,
        }
    }
    let agreement = if compared > 0 {
        (tp + tn) as f64 / compared as f64
    } else {
        0.0
    };
    Ok(ConcordanceReport {
        threshold,
        predicted,
        true_positive: tp,
        false_positive: fp,
        false_negative: fnn,
        true_negative: tn,
        agreement,
        compared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpacing;
    use crate::planner::benchmark_closed_form;

    fn setup(
        n: usize,
    ) -> (ModelParams, SkillGrid, CostFunctions, Vec<f64>) {
        let params = ModelParams::calibrated().with_promised_welfare(0.3);
        let grid = SkillGrid::regular(
            (n, n),
            (1.0, 2.0),
            (1.0, 2.0),
            GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let z = vec![1.0; n * n];
        (params, grid, costs, z)
    }

    #[test]
    fn benchmark_residual_vanishes() {
        // At the closed form with lambda = 1 the marginal terms are exactly
        // zero node-wise, so the lattice residual is machine noise.
        let (params, grid, costs, z) = setup(7);
        let alloc = benchmark_closed_form(&grid, &z, &params, &costs).unwrap();
        let res = el_residual(&alloc, &grid, 1.0, &params, &costs).unwrap();
        let max = res
            .iter()
            .filter_map(|r| r.value().map(f64::abs))
            .fold(0.0f64, f64::max);
        assert!(max < 1e-9, "benchmark residual should vanish, got {max}");
    }

    /// Manufactured smooth field with a known analytic residual; the lattice
    /// error is pure truncation and must shrink at second order.
    #[test]
    fn truncation_shrinks_under_refinement() {
        let params = ModelParams::calibrated();
        let costs = CostFunctions::linear_consumption(&params);
        let lambda = 0.7;
        let run = |m: usize| -> f64 {
            // Uniform p-grid so node densities are exactly constant.
            let p_lo = 0.08;
            let p_hi = 0.16;
            let p_of = |k: usize| p_hi - (p_hi - p_lo) * k as f64 / (m - 1) as f64;
            let alpha: Vec<f64> = (0..m)
                .map(|k| (params.kappa / p_of(k)).powf(1.0 / params.rho))
                .collect();
            let n = m * m;
            let grid =
                SkillGrid::new(alpha.clone(), alpha, vec![1.0 / n as f64; n], &params).unwrap();
            // Smooth positive decreasing allocation x_s = exp(-5 p_s) scaled.
            let mut xc = Vec::with_capacity(n);
            let mut xm = Vec::with_capacity(n);
            for idx in 0..n {
                let (pc, pm) = grid.p(idx);
                xc.push((-5.0 * pc).exp() * 3.0);
                xm.push((-5.0 * pm).exp() * 2.0);
            }
            let alloc =
                AllocationField::new(m, m, vec![1.0; n], xc, xm, vec![1.0; n]).unwrap();
            let res = el_residual(&alloc, &grid, lambda, &params, &costs).unwrap();
            // Analytic counterpart: g_s = -dens (z X'(x_s(p)) + p_s);
            // d/dp g_s known in closed form.
            let wc = SkillGrid::p_cell_widths(&grid.p_c);
            let wm = SkillGrid::p_cell_widths(&grid.p_m);
            let rho = params.rho;
            let mut worst = 0.0f64;
            for idx in 0..n {
                let v = match res[idx] {
                    ElResidual::Value(v) => v,
                    _ => continue,
                };
                let (i, j) = grid.coords(idx);
                let dens = grid.mass(idx) / (wc[i] * wm[j]);
                let (pc, pm) = grid.p(idx);
                // d/dp [-(z X'(x(p)) + p)] with x(p) = A exp(-5p):
                // X'(x) = -(1/rho) x^(2/rho - 1), so
                // d/dp X'(x(p)) = -(1/rho)(2/rho - 1) x^(2/rho - 2) x'(p).
                let term = |p: f64, a: f64| {
                    let x = a * (-5.0 * p).exp();
                    let xp = -5.0 * x;
                    let z = 1.0;
                    -dens * (z * -(1.0 / rho) * (2.0 / rho - 1.0) * x.powf(2.0 / rho - 2.0) * xp
                        + 1.0)
                };
                let analytic = dens * (1.0 - lambda) - term(pc, 3.0) - term(pm, 2.0);
                worst = worst.max((v - analytic).abs());
            }
            worst
        };
        let coarse = run(7);
        let fine = run(13);
        // Halving the spacing shrinks the truncation roughly fourfold.
        assert!(
            fine < coarse / 2.5,
            "truncation did not shrink: {coarse} -> {fine}"
        );
        assert!(coarse <= 10.0 * 4.0 * fine, "coarse error implausibly large");
    }

    #[test]
    fn too_small_axes_rejected() {
        let (params, _, costs, _) = setup(3);
        let grid2 = SkillGrid::regular(
            (2, 3),
            (1.0, 2.0),
            (1.0, 2.0),
            GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let n = grid2.node_count();
        let alloc = AllocationField::new(
            2,
            3,
            vec![1.0; n],
            vec![1.0; n],
            vec![1.0; n],
            vec![1.0; n],
        )
        .unwrap();
        assert!(el_residual(&alloc, &grid2, 1.0, &params, &costs).is_err());
    }

    #[test]
    fn one_dimensional_axis_contributes_nothing() {
        let params = ModelParams::calibrated();
        let grid = SkillGrid::regular(
            (1, 9),
            (1.0, 1.0),
            (1.0, 2.0),
            GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let alloc = benchmark_closed_form(&grid, &vec![1.0; 9], &params, &costs).unwrap();
        let res = el_residual(&alloc, &grid, 1.0, &params, &costs).unwrap();
        // Ends are boundary, interior defined.
        assert_eq!(res[0], ElResidual::Boundary);
        assert!(res[4].value().is_some());
    }

    #[test]
    fn zero_task_nodes_are_singular() {
        let (params, grid, costs, _) = setup(5);
        let n = grid.node_count();
        let mut xc = vec![1.0; n];
        xc[grid.index(2, 2)] = 0.0;
        let alloc = AllocationField::new(
            5,
            5,
            vec![1.0; n],
            xc,
            vec![1.0; n],
            vec![1.0; n],
        )
        .unwrap();
        let res = el_residual(&alloc, &grid, 1.0, &params, &costs).unwrap();
        assert_eq!(res[grid.index(2, 2)], ElResidual::Singular);
        assert_eq!(res[grid.index(1, 2)], ElResidual::Singular);
        assert!(res[grid.index(1, 1)].value().is_some());
    }

    #[test]
    fn threshold_policies() {
        let res = vec![
            ElResidual::Boundary,
            ElResidual::Value(0.1),
            ElResidual::Value(3.0),
            ElResidual::Singular,
        ];
        let actual = vec![false, false, true, true];
        let rep = bunched_via_el(&res, &actual, ThresholdPolicy::Absolute(1.0), None).unwrap();
        assert_eq!(rep.compared, 3);
        assert_eq!(rep.true_positive, 2);
        assert_eq!(rep.true_negative, 1);
        assert!((rep.agreement - 1.0).abs() < 1e-12);
        // An infinite threshold predicts nothing, including singular nodes.
        let rep = bunched_via_el(
            &res,
            &actual,
            ThresholdPolicy::Absolute(f64::INFINITY),
            None,
        )
        .unwrap();
        assert!(rep.predicted.iter().all(|&p| !p));
        assert_eq!(rep.true_positive, 0);
        // The benchmark-quantile policy needs benchmark residuals.
        assert!(bunched_via_el(&res, &actual, ThresholdPolicy::default(), None).is_err());
        let bench = vec![ElResidual::Value(0.01), ElResidual::Value(0.02)];
        let rep =
            bunched_via_el(&res, &actual, ThresholdPolicy::default(), Some(&bench)).unwrap();
        assert!(rep.threshold > 0.0);
    }
}
