//! Outer assignment iteration: alternate the fixed-assignment planner solve
//! with a comonotone re-sorting of project values against the effective
//! skill index until the assignment stops moving.

use crate::cost::CostFunctions;
use crate::error::{Error, Result};
use crate::field::AllocationField;
use crate::grid::SkillGrid;
use crate::params::ModelParams;
use crate::planner::pairs::{enumerate_irreducible, IrreduciblePairSet};
use crate::planner::refine::{solve_fixed_assignment, FixedAssignmentResult, RefineOptions};

/// Discrete distribution of firm project values, sorted ascending, total
/// mass one.
#[derive(Debug, Clone)]
pub struct FirmDistribution {
    pub z: Vec<f64>,
    pub mass: Vec<f64>,
}

impl FirmDistribution {
    pub fn degenerate(z: f64) -> Self {
        FirmDistribution {
            z: vec![z],
            mass: vec![1.0],
        }
    }

    /// Equal-mass support points.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let weighted: Vec<(f64, f64)> = values
            .iter()
            .map(|&z| (z, 1.0 / values.len() as f64))
            .collect();
        Self::from_weighted(weighted)
    }

    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Argument("firm distribution is empty".into()));
        }
        for &(z, m) in &pairs {
            if !(z > 0.0) || !z.is_finite() || !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Argument(format!(
                    "firm support needs z > 0 and mass >= 0, got ({z}, {m})"
                )));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pairs.iter().map(|&(_, m)| m).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "firm masses must sum to the worker mass (1), got {total}"
            )));
        }
        Ok(FirmDistribution {
            z: pairs.iter().map(|&(z, _)| z).collect(),
            mass: pairs.iter().map(|&(_, m)| m).collect(),
        })
    }

    /// Step quantile: smallest support point whose cumulative mass reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let mut cum = 0.0;
        for (z, m) in self.z.iter().zip(&self.mass) {
            cum += m;
            if cum >= q - 1e-15 {
                return *z;
            }
        }
        *self.z.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.z.iter().zip(&self.mass).map(|(&z, &m)| z * m).sum()
    }
}

/// Comonotone coupling of the firm distribution with a per-node index:
/// nodes are ranked by the index (ties by node id) and each receives the
/// firm quantile at the midpoint of its own mass interval.
pub fn quantile_match(grid: &SkillGrid, index: &[f64], firms: &FirmDistribution) -> Vec<f64> {
    let n = grid.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| index[a].partial_cmp(&index[b]).unwrap().then(a.cmp(&b)));
    let mut z = vec![0.0; n];
    let mut cum = 0.0;
    for &node in &order {
        let m = grid.mass(node);
        z[node] = firms.quantile(cum + 0.5 * m);
        cum += m;
    }
    z
}

/// Team effective skill per node in physical units,
/// `X = x_c^(2/rho) + x_m^(2/rho)` of the utility-coordinate tasks.
pub fn effective_skill(alloc: &AllocationField, params: &ModelParams) -> Vec<f64> {
    let e = 2.0 / params.rho;
    alloc
        .x_c
        .iter()
        .zip(&alloc.x_m)
        .map(|(&xc, &xm)| xc.powf(e) + xm.powf(e))
        .collect()
}

/// How the assignment iteration starts.
#[derive(Debug, Clone)]
pub enum InitialAssignment {
    /// Every node starts at the mass-weighted mean project value.
    MeanValue,
    /// Explicit per-node start.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct AssignmentOptions {
    pub max_outer: usize,
    /// Convergence tolerance on the largest per-node assignment change.
    pub tol: f64,
    pub initial: InitialAssignment,
    pub refine: RefineOptions,
}

impl Default for AssignmentOptions {
    fn default() -> Self {
        AssignmentOptions {
            max_outer: 50,
            tol: 1e-9,
            initial: InitialAssignment::MeanValue,
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OuterRecord {
    pub iteration: usize,
    pub max_delta: f64,
    pub true_cost: f64,
}

#[derive(Debug, Clone)]
pub struct AssignmentResult {
    pub alloc: AllocationField,
    pub z: Vec<f64>,
    pub lambda: f64,
    pub outside_duals: Vec<f64>,
    pub refinement: crate::planner::refine::RefinementState,
    pub outer_history: Vec<OuterRecord>,
    pub lp_objective: f64,
    pub true_cost: f64,
}

/// Alternate planner solves with comonotone re-assignment until no node's
/// project value moves by more than the tolerance.
pub fn assignment_iterate(
    grid: &SkillGrid,
    firms: &FirmDistribution,
    params: &ModelParams,
    costs: &CostFunctions,
    opts: &AssignmentOptions,
) -> Result<AssignmentResult> {
    let pairs = enumerate_irreducible(grid, None);
    assignment_iterate_with_pairs(grid, firms, params, costs, &pairs, opts, |_, _| Ok(()))
}

/// Same as [`assignment_iterate`] with a precomputed pair set and a per-outer
/// hook (used for checkpointing by callers that persist state).
pub fn assignment_iterate_with_pairs(
    grid: &SkillGrid,
    firms: &FirmDistribution,
    params: &ModelParams,
    costs: &CostFunctions,
    pairs: &IrreduciblePairSet,
    opts: &AssignmentOptions,
    mut on_outer: impl FnMut(usize, &FixedAssignmentResult) -> Result<()>,
) -> Result<AssignmentResult> {
    let n = grid.node_count();
    let total_mass: f64 = grid.density.iter().sum();
    let firm_mass: f64 = firms.mass.iter().sum();
    if (firm_mass - total_mass).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "firm mass {firm_mass} does not match worker mass {total_mass}"
        )));
    }
    let mut z = match &opts.initial {
        InitialAssignment::MeanValue => vec![firms.mean(); n],
        InitialAssignment::Explicit(v) => {
            if v.len() != n {
                return Err(Error::Argument(format!(
                    "initial assignment has {} entries, expected {n}",
                    v.len()
                )));
            }
            v.clone()
        }
    };
    let mut outer_history = Vec::new();
    let z_scale = firms.z.iter().fold(1.0f64, |a, &v| a.max(v.abs()));

    for iteration in 0..opts.max_outer {
        let res = solve_fixed_assignment(grid, &z, params, costs, pairs, &opts.refine)?;
        on_outer(iteration, &res)?;
        let index = effective_skill(&res.alloc, params);
        let z_new = quantile_match(grid, &index, firms);
        let max_delta = z
            .iter()
            .zip(&z_new)
            .fold(0.0f64, |a, (&old, &new)| a.max((new - old).abs()));
        outer_history.push(OuterRecord {
            iteration,
            max_delta,
            true_cost: res.true_cost,
        });
        if max_delta <= opts.tol * z_scale {
            return Ok(AssignmentResult {
                lambda: res.lambda,
                outside_duals: res.outside_duals,
                lp_objective: res.lp_objective,
                true_cost: res.true_cost,
                refinement: res.state,
                alloc: res.alloc,
                z,
                outer_history,
            });
        }
        z = z_new;
    }
    let tail: Vec<String> = outer_history
        .iter()
        .rev()
        .take(5)
        .map(|r| format!("iter {}: max dz {:.3e}", r.iteration, r.max_delta))
        .collect();
    Err(Error::NoConvergence(format!(
        "assignment did not converge within {} outer iterations; recent deltas: {}",
        opts.max_outer,
        tail.join("; ")
    )))
}
