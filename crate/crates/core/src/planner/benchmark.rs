//! Closed-form unconstrained benchmark: no incentive or outside-option
//! constraints, first-order conditions solved per node.

use crate::cost::CostFunctions;
use crate::error::{Error, Result};
use crate::field::AllocationField;
use crate::grid::SkillGrid;
use crate::params::ModelParams;

/// Benchmark allocation: physical tasks `x_s = (z a_s^rho / kappa rho)^(1/(rho-2))`
/// per node (in utility coordinates `x = x_phys^rho`), consumption uniform at
/// the level that makes promise keeping bind.
///
/// Requires linear consumption utility, which pins the promise-keeping
/// multiplier at one.
pub fn benchmark_closed_form(
    grid: &SkillGrid,
    z: &[f64],
    params: &ModelParams,
    costs: &CostFunctions,
) -> Result<AllocationField> {
    if !costs.consumption.is_linear() {
        return Err(Error::Argument(
            "the closed-form benchmark needs linear consumption utility".into(),
        ));
    }
    if z.len() != grid.node_count() {
        return Err(Error::Argument(format!(
            "assignment has {} entries, expected {}",
            z.len(),
            grid.node_count()
        )));
    }
    let rho = params.rho;
    let kr = params.kappa_rho();
    let n = grid.node_count();
    let mut x_c = Vec::with_capacity(n);
    let mut x_m = Vec::with_capacity(n);
    let mut pk_cost = 0.0;
    for idx in 0..n {
        if !(z[idx] > 0.0) {
            return Err(Error::Argument(format!(
                "project value at node {idx} must be positive"
            )));
        }
        let (ac, am) = grid.alpha(idx);
        let xc_phys = (z[idx] * ac.powf(rho) / kr).powf(1.0 / (rho - 2.0));
        let xm_phys = (z[idx] * am.powf(rho) / kr).powf(1.0 / (rho - 2.0));
        let xc = xc_phys.powf(rho);
        let xm = xm_phys.powf(rho);
        let (pc, pm) = grid.p(idx);
        pk_cost += grid.mass(idx) * (pc * xc + pm * xm);
        x_c.push(xc);
        x_m.push(xm);
    }
    // Uniform consumption utility making promise keeping bind exactly.
    let c_bar = params.promised_welfare + pk_cost;
    AllocationField::new(
        grid.n_c,
        grid.n_m,
        vec![c_bar; n],
        x_c,
        x_m,
        z.to_vec(),
    )
}
