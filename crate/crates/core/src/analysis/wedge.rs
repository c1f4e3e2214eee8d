//! Tax wedges per task, computed in both coordinate systems and
//! cross-checked.

use crate::cost::CostFunctions;
use crate::error::{Error, Result};
use crate::field::AllocationField;
use crate::grid::SkillGrid;
use crate::params::ModelParams;

/// Per-node tax wedges; `None` marks a node whose task level is zero, where
/// the wedge is undefined.
#[derive(Debug, Clone)]
pub struct WedgeField {
    pub tau_c: Vec<Option<f64>>,
    pub tau_m: Vec<Option<f64>>,
}

impl WedgeField {
    /// Mean absolute wedge over a set of nodes, skipping undefined entries.
    pub fn mean_abs(field: &[Option<f64>], nodes: impl Iterator<Item = usize>) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for idx in nodes {
            if let Some(t) = field[idx] {
                sum += t.abs();
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }
}

/// Compute both wedge formulas per node and task - the parameter-space form
/// `1 - tau = -(p_s / z) C'(c) / X'(x_s)` and the skill-space form
/// `1 - tau = kappa rho x_phys^(rho-2) C'(c) / (z alpha_s^rho)` - verify they
/// agree within 1e-8, and return the skill-space values.
pub fn wedges(
    alloc: &AllocationField,
    grid: &SkillGrid,
    params: &ModelParams,
    costs: &CostFunctions,
) -> Result<WedgeField> {
    if alloc.n_c != grid.n_c || alloc.n_m != grid.n_m {
        return Err(Error::Argument("allocation and grid shapes differ".into()));
    }
    let rho = params.rho;
    let n = grid.node_count();
    let mut tau_c = Vec::with_capacity(n);
    let mut tau_m = Vec::with_capacity(n);
    for idx in 0..n {
        let (pc, pm) = grid.p(idx);
        let (ac, am) = grid.alpha(idx);
        let z = alloc.z[idx];
        let cprime = costs.consumption.deriv(alloc.c[idx]);
        let one = |x_util: f64, p_s: f64, alpha_s: f64| -> Result<Option<f64>> {
            if x_util <= 0.0 {
                return Ok(None);
            }
            let p_form = -(p_s / z) * cprime / costs.task.deriv(x_util);
            let x_phys = x_util.powf(1.0 / rho);
            let a_form =
                params.kappa_rho() * x_phys.powf(rho - 2.0) * cprime / (z * alpha_s.powf(rho));
            if (p_form - a_form).abs() > 1e-8 * (1.0 + a_form.abs()) {
                return Err(Error::Numeric(format!(
                    "wedge formulas disagree at node {idx}: {p_form} vs {a_form}"
                )));
            }
            Ok(Some(1.0 - a_form))
        };
        tau_c.push(one(alloc.x_c[idx], pc, ac)?);
        tau_m.push(one(alloc.x_m[idx], pm, am)?);
    }
    // Wedges are strictly below one wherever defined.
    for t in tau_c.iter().chain(tau_m.iter()).flatten() {
        if !(*t < 1.0) || !t.is_finite() {
            return Err(Error::Numeric(format!("wedge out of range: {t}")));
        }
    }
    Ok(WedgeField { tau_c, tau_m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpacing;
    use crate::planner::benchmark_closed_form;

    #[test]
    fn benchmark_wedges_vanish() {
        let params = ModelParams::calibrated().with_promised_welfare(0.4);
        let grid = SkillGrid::regular(
            (4, 4),
            (1.0, 2.0),
            (1.0, 2.0),
            GridSpacing::Geometric,
            &params,
        )
        .unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let z: Vec<f64> = (0..16).map(|k| 0.9 + 0.02 * k as f64).collect();
        let alloc = benchmark_closed_form(&grid, &z, &params, &costs).unwrap();
        let w = wedges(&alloc, &grid, &params, &costs).unwrap();
        for t in w.tau_c.iter().chain(w.tau_m.iter()) {
            let t = t.expect("benchmark tasks are positive");
            assert!(t.abs() < 1e-9, "wedge should vanish, got {t}");
        }
    }

    #[test]
    fn unit_example_gives_zero_wedge() {
        // x = 1, z = 1, alpha^rho = 1/2, rho = 2.8 gives 1 - tau = 1.
        let params = ModelParams::calibrated().with_promised_welfare(0.0);
        let alpha = 0.5f64.powf(1.0 / params.rho);
        let grid = SkillGrid::new(vec![alpha], vec![alpha], vec![1.0], &params).unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let alloc =
            AllocationField::new(1, 1, vec![1.0], vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let w = wedges(&alloc, &grid, &params, &costs).unwrap();
        assert!(w.tau_c[0].unwrap().abs() < 1e-12);
        assert!(w.tau_m[0].unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_task_is_undefined_marker() {
        let params = ModelParams::calibrated();
        let grid = SkillGrid::new(vec![1.0], vec![1.0], vec![1.0], &params).unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let alloc =
            AllocationField::new(1, 1, vec![1.0], vec![0.0], vec![2.0], vec![1.0]).unwrap();
        let w = wedges(&alloc, &grid, &params, &costs).unwrap();
        assert!(w.tau_c[0].is_none());
        assert!(w.tau_m[0].is_some());
    }

    #[test]
    fn formulas_agree_on_random_allocations() {
        // The change-of-variables identity makes the two forms agree
        // node-wise on any positive allocation.
        let params = ModelParams::calibrated();
        let grid = SkillGrid::regular(
            (5, 5),
            (0.7, 2.3),
            (0.8, 1.9),
            GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let n = grid.node_count();
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let xc: Vec<f64> = (0..n).map(|_| 0.1 + 20.0 * next()).collect();
        let xm: Vec<f64> = (0..n).map(|_| 0.1 + 20.0 * next()).collect();
        let z: Vec<f64> = (0..n).map(|_| 0.5 + next()).collect();
        let alloc = AllocationField::new(5, 5, vec![1.0; n], xc, xm, z).unwrap();
        // wedges() errors if the two routes disagree beyond 1e-8.
        wedges(&alloc, &grid, &params, &costs).unwrap();
    }
}
