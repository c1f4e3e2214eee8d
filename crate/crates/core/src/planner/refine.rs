//! Iterative solve of the approximate planner problem at a fixed
//! assignment: tangent families are rebuilt per iteration at the current
//! precision, the LP is solved with lazy activation of tangent and
//! incentive rows, and the location boxes are recentered (on a proper
//! solution) or relaxed on the binding side (otherwise) until the total
//! approximation error reaches its target.

use crate::cost::CostFunctions;
use crate::error::{Error, Result};
use crate::field::AllocationField;
use crate::grid::SkillGrid;
use crate::lp::{lp_solve_warm, LpStatus, SolverOptions};
use crate::params::ModelParams;
use crate::planner::assemble::{
    assemble, ActiveRows, Boxes, PlannerSpec, TangentSet, V_C, V_R, V_RC, V_RM, V_XC, V_XM,
    VARS_PER_NODE,
};
use crate::planner::pairs::IrreduciblePairSet;
use crate::planner::tangent::{build_tangents_capped, TangentFamily};

/// Options of the refinement loop.
#[derive(Debug, Clone)]
pub struct RefineOptions {
    /// Target for the total achieved approximation error
    /// (consumption plus project-value-weighted task errors).
    pub target_eps: f64,
    /// Initial per-family precision request.
    pub initial_eps: f64,
    /// Precision shrink factor per accepted iteration.
    pub shrink: f64,
    /// Cap on refinement iterations (including relax-only rounds).
    pub max_iterations: usize,
    /// Cap on tangent-family size.
    pub tangent_cap: usize,
    /// Activate tangent and incentive rows lazily instead of assembling the
    /// full LP.
    pub lazy: bool,
    /// Incentive rows activated per generation round.
    pub ic_batch: usize,
    /// Cap on row-generation rounds per LP.
    pub max_inner_rounds: usize,
    /// Include incentive rows (off in benchmark mode).
    pub include_ic: bool,
    /// Include outside-option rows (off in benchmark mode).
    pub include_outside: bool,
    /// Initial box upper bounds as a multiple of the anchor allocation.
    pub box_factor: f64,
    /// Half-width fraction kept when recentering boxes on a proper solution.
    pub recenter_fraction: f64,
    pub solver: SolverOptions,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            target_eps: 1e-6,
            initial_eps: 1e-2,
            shrink: 0.5,
            max_iterations: 80,
            tangent_cap: crate::planner::tangent::TANGENT_CAP,
            lazy: true,
            ic_batch: 1000,
            max_inner_rounds: 400,
            include_ic: true,
            include_outside: true,
            box_factor: 3.0,
            recenter_fraction: 0.25,
            solver: SolverOptions::default(),
        }
    }
}

impl RefineOptions {
    pub fn benchmark_mode(mut self) -> Self {
        self.include_ic = false;
        self.include_outside = false;
        self
    }
}

/// Properness verdict with the binding nodes.
#[derive(Debug, Clone)]
pub struct ProperReport {
    pub proper: bool,
    /// `(node, variable, at_upper)` for every binding box side.
    pub binding: Vec<(usize, BoxVar, bool)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxVar {
    C,
    Xc,
    Xm,
}

/// Check strict interiority of a solution in its boxes. A task variable may
/// sit exactly at a zero lower bound and remain proper; when the consumption
/// cost is linear its box is a guard, not an approximation interval, and is
/// exempt (`check_c = false`).
pub fn proper_check(alloc: &AllocationField, boxes: &Boxes, check_c: bool) -> ProperReport {
    let mut binding = Vec::new();
    let n = alloc.node_count();
    let near = |v: f64, b: f64, w: f64| (v - b).abs() <= 1e-9 + 1e-7 * w;
    for idx in 0..n {
        if check_c {
            let (lo, hi) = boxes.c[idx];
            let w = hi - lo;
            if near(alloc.c[idx], lo, w) {
                binding.push((idx, BoxVar::C, false));
            }
            if near(alloc.c[idx], hi, w) {
                binding.push((idx, BoxVar::C, true));
            }
        }
        for (val, (lo, hi), var) in [
            (alloc.x_c[idx], boxes.x_c[idx], BoxVar::Xc),
            (alloc.x_m[idx], boxes.x_m[idx], BoxVar::Xm),
        ] {
            let w = hi - lo;
            if near(val, lo, w) && lo > 0.0 {
                binding.push((idx, var, false));
            }
            if near(val, hi, w) {
                binding.push((idx, var, true));
            }
        }
    }
    ProperReport {
        proper: binding.is_empty(),
        binding,
    }
}

/// One refinement iteration's bookkeeping.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub requested_eps_c: f64,
    pub requested_eps_task: f64,
    /// Achieved `eps_c + eps_{s,c} + eps_{s,m}` with project-value weights.
    pub achieved_eps_total: f64,
    pub lp_objective: f64,
    /// Objective evaluated with the true convex costs.
    pub true_cost: f64,
    pub proper: bool,
    pub rows: usize,
    pub lp_solves: usize,
    pub pivots: usize,
}

/// Refinement loop state; boxes always contain the last solution when it
/// was proper.
#[derive(Debug, Clone)]
pub struct RefinementState {
    pub eps_c: f64,
    pub eps_task: f64,
    pub boxes: Boxes,
    pub iteration: usize,
    pub proper: bool,
    pub history: Vec<IterationRecord>,
}

/// Outcome of a fixed-assignment solve.
#[derive(Debug, Clone)]
pub struct FixedAssignmentResult {
    pub alloc: AllocationField,
    /// Dual of the promise-keeping row.
    pub lambda: f64,
    /// Duals of the outside-option rows (zeros in benchmark mode).
    pub outside_duals: Vec<f64>,
    pub state: RefinementState,
    pub lp_objective: f64,
    pub true_cost: f64,
}

/// Anchor allocation for the initial boxes: tasks from the first-order
/// condition with a unit promise-keeping multiplier, consumption uniform at
/// the level that makes promise keeping bind. Valid as a box anchor for any
/// consumption cost.
fn anchor_allocation(grid: &SkillGrid, z: &[f64], params: &ModelParams) -> (Vec<f64>, Vec<f64>, f64) {
    let rho = params.rho;
    let kr = params.kappa_rho();
    let n = grid.node_count();
    let mut x_c = Vec::with_capacity(n);
    let mut x_m = Vec::with_capacity(n);
    let mut pk_cost = 0.0;
    for idx in 0..n {
        let (ac, am) = grid.alpha(idx);
        let xc = (z[idx] * ac.powf(rho) / kr).powf(1.0 / (rho - 2.0)).powf(rho);
        let xm = (z[idx] * am.powf(rho) / kr).powf(1.0 / (rho - 2.0)).powf(rho);
        let (pc, pm) = grid.p(idx);
        pk_cost += grid.mass(idx) * (pc * xc + pm * xm);
        x_c.push(xc);
        x_m.push(xm);
    }
    (x_c, x_m, params.promised_welfare + pk_cost)
}

fn initial_boxes(
    grid: &SkillGrid,
    z: &[f64],
    params: &ModelParams,
    costs: &CostFunctions,
    factor: f64,
) -> Boxes {
    let (xc, xm, c_bar) = anchor_allocation(grid, z, params);
    let n = grid.node_count();
    let linear_c = costs.consumption.is_linear();
    let c_scale = c_bar.abs() + 1.0;
    let mut boxes = Boxes {
        c: Vec::with_capacity(n),
        x_c: Vec::with_capacity(n),
        x_m: Vec::with_capacity(n),
    };
    for idx in 0..n {
        if linear_c {
            // Guard bounds only; exempt from the properness check.
            boxes.c.push((-1e3 * c_scale, 1e3 * c_scale));
        } else {
            boxes.c.push((0.0, factor * c_bar.max(1e-9)));
        }
        boxes.x_c.push((0.0, (factor * xc[idx]).max(1e-9)));
        boxes.x_m.push((0.0, (factor * xm[idx]).max(1e-9)));
    }
    boxes
}

struct NodeValues {
    c: Vec<f64>,
    x_c: Vec<f64>,
    x_m: Vec<f64>,
    r: Vec<f64>,
    r_c: Vec<f64>,
    r_m: Vec<f64>,
}

fn split_solution(x: &[f64], n: usize) -> NodeValues {
    let mut v = NodeValues {
        c: Vec::with_capacity(n),
        x_c: Vec::with_capacity(n),
        x_m: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        r_c: Vec::with_capacity(n),
        r_m: Vec::with_capacity(n),
    };
    for idx in 0..n {
        let base = idx * VARS_PER_NODE;
        v.c.push(x[base + V_C]);
        v.x_c.push(x[base + V_XC]);
        v.x_m.push(x[base + V_XM]);
        v.r.push(x[base + V_R]);
        v.r_c.push(x[base + V_RC]);
        v.r_m.push(x[base + V_RM]);
    }
    v
}

fn true_cost(
    grid: &SkillGrid,
    z: &[f64],
    costs: &CostFunctions,
    vals: &NodeValues,
) -> f64 {
    let mut total = 0.0;
    for idx in 0..grid.node_count() {
        let mass = grid.mass(idx);
        if mass == 0.0 {
            continue;
        }
        total += mass
            * (costs.consumption.value(vals.c[idx])
                + z[idx]
                    * (costs.task.value(vals.x_c[idx].max(0.0))
                        + costs.task.value(vals.x_m[idx].max(0.0))));
    }
    total
}

/// Solve the approximate planner problem for a fixed assignment by the
/// precision/boundary refinement loop. Terminates with a proper solution
/// whose achieved approximation total is at most `opts.target_eps`; the
/// returned `lambda` is the dual of the promise-keeping row.
pub fn solve_fixed_assignment(
    grid: &SkillGrid,
    z: &[f64],
    params: &ModelParams,
    costs: &CostFunctions,
    pairs: &IrreduciblePairSet,
    opts: &RefineOptions,
) -> Result<FixedAssignmentResult> {
    params.validate()?;
    let spec = PlannerSpec {
        grid,
        z,
        params,
        costs: *costs,
        include_ic: opts.include_ic,
        include_outside: opts.include_outside,
    };
    spec.validate()?;
    if !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::Argument(format!(
            "shrink factor must lie in (0, 1), got {}",
            opts.shrink
        )));
    }
    let n = grid.node_count();
    let linear_c = costs.consumption.is_linear();
    let mut boxes = initial_boxes(grid, z, params, costs, opts.box_factor);
    let (anchor_xc, anchor_xm, anchor_c) = anchor_allocation(grid, z, params);

    let mut eps_c = opts.initial_eps;
    let mut eps_task = opts.initial_eps;
    let mut history: Vec<IterationRecord> = Vec::new();

    // Persistent row pool: epigraph cuts stay valid across refinement
    // iterations (a tangent of the true cost bounds it from below
    // everywhere), so the pool and the basis snapshot survive box and
    // precision updates. The pool is pruned to its binding rows when it
    // grows past the cap.
    let mut active = ActiveRows::new(pairs.len());
    let mut warm: Option<crate::lp::WarmStart> = None;
    let mut last_vals: Option<NodeValues> = None;
    if opts.lazy && opts.include_ic {
        for (k, &(di, dj)) in pairs.offsets.iter().enumerate() {
            if di.abs() + dj.abs() == 1 {
                active.add_ic(k);
            }
        }
    }
    let prune_cap = 9 * n + 4000;

    for iteration in 0..opts.max_iterations {
        // Tangent families on the current boxes at the current precision;
        // task precision requests are deflated by the local project value so
        // that the value-weighted achieved error meets the target.
        let mut tangents = TangentSet {
            consumption: Vec::with_capacity(n),
            task_c: Vec::with_capacity(n),
            task_m: Vec::with_capacity(n),
        };
        for idx in 0..n {
            tangents.consumption.push(build_tangents_capped(
                costs.consumption,
                boxes.c[idx],
                eps_c,
                opts.tangent_cap,
            )?);
            let eps_raw = eps_task / z[idx];
            tangents.task_c.push(build_tangents_capped(
                costs.task,
                boxes.x_c[idx],
                eps_raw,
                opts.tangent_cap,
            )?);
            tangents.task_m.push(build_tangents_capped(
                costs.task,
                boxes.x_m[idx],
                eps_raw,
                opts.tangent_cap,
            )?);
        }

        if !opts.lazy {
            active = ActiveRows::full(&tangents, pairs);
            warm = None;
        } else {
            // Prune the pool to the rows that were binding at the previous
            // solution once it outgrows the cap; pruning reorders rows, so
            // the basis snapshot is dropped.
            if active.len() > prune_cap {
                if let Some(prev) = &last_vals {
                    let mut pruned = ActiveRows::new(pairs.len());
                    for row in &active.rows {
                        let keep = match *row {
                            crate::planner::assemble::PoolRow::Cut {
                                kind,
                                node,
                                slope,
                                intercept,
                            } => {
                                let idx = node as usize;
                                let (t, r) = match kind {
                                    0 => (prev.c[idx], prev.r[idx]),
                                    1 => (prev.x_c[idx], prev.r_c[idx]),
                                    _ => (prev.x_m[idx], prev.r_m[idx]),
                                };
                                r - (slope * t - intercept) <= 1e-7 * (1.0 + r.abs())
                            }
                            crate::planner::assemble::PoolRow::Ic { pair } => {
                                let (a, b) = pairs.pairs[pair as usize];
                                let (a, b) = (a as usize, b as usize);
                                let (pc, pm) = grid.p(a);
                                let resid = prev.c[a] - pc * prev.x_c[a] - pm * prev.x_m[a]
                                    - (prev.c[b] - pc * prev.x_c[b] - pm * prev.x_m[b]);
                                resid <= 1e-7 * (1.0 + prev.c[a].abs())
                            }
                        };
                        if keep {
                            match *row {
                                crate::planner::assemble::PoolRow::Cut {
                                    kind,
                                    node,
                                    slope,
                                    intercept,
                                } => {
                                    pruned.add_cut(kind, node as usize, slope, intercept);
                                }
                                crate::planner::assemble::PoolRow::Ic { pair } => {
                                    pruned.add_ic(pair as usize);
                                }
                            }
                        }
                    }
                    active = pruned;
                    warm = None;
                }
            }
            // Seed one cut per family at the anchor point (deduplicated, so
            // repeats across iterations are free).
            let mut seed_family = |kind: u8, idx: usize, fam: &TangentFamily, anchor: f64| {
                let k = fam.best_index(anchor.clamp(fam.interval.0, fam.interval.1));
                active.add_cut(kind, idx, fam.slopes[k], fam.intercepts[k]);
            };
            for idx in 0..n {
                seed_family(0, idx, &tangents.consumption[idx], anchor_c);
                seed_family(1, idx, &tangents.task_c[idx], anchor_xc[idx]);
                seed_family(2, idx, &tangents.task_m[idx], anchor_xm[idx]);
            }
        }

        // Row-generation loop; re-solves warm-start from the previous basis
        // since rows are append-only.
        let mut lp_solves = 0usize;
        let mut pivots = 0usize;
        let mut rows;
        let mut vals;
        let mut lambda;
        let mut outside_duals;
        let mut lp_objective;
        loop {
            let planner_lp = assemble(&spec, &tangents, &boxes, pairs, &active)?;
            let (sol, snapshot) = lp_solve_warm(&planner_lp.lp, &opts.solver, warm.as_ref())?;
            warm = Some(snapshot);
            lp_solves += 1;
            pivots += sol.iterations;
            rows = planner_lp.lp.num_rows();
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    return Err(Error::Infeasible(format!(
                        "planner LP infeasible at iteration {iteration}: promised welfare {} \
                         cannot be met within the current boxes",
                        params.promised_welfare
                    )))
                }
                other => {
                    if std::env::var("MDTAX_DUMP").is_ok() {
                        let bytes = crate::lp::lp_export(&planner_lp.lp, crate::lp::ExportFormat::Mps).unwrap();
                        std::fs::write("/tmp/fail2.mps", bytes).unwrap();
                    }
                    return Err(Error::Numeric(format!(
                        "planner LP solve ended with status {other:?} at iteration {iteration} \
                         (primal {:.3e}, dual {:.3e}, compl {:.3e}, {} pivots, {} rows)",
                        sol.max_primal_residual,
                        sol.max_dual_residual,
                        sol.complementarity,
                        sol.iterations,
                        planner_lp.lp.num_rows()
                    )))
                }
            }
            vals = split_solution(&sol.x, n);
            lambda = sol.duals[planner_lp.pk_row];
            outside_duals = planner_lp
                .outside_rows
                .iter()
                .map(|&r| if r == usize::MAX { 0.0 } else { sol.duals[r] })
                .collect::<Vec<f64>>();
            lp_objective = sol.objective;

            if !opts.lazy {
                break;
            }
            // Scan for violated rows.
            let mut added = false;
            for (kind, fams, target, aux) in [
                (0u8, &tangents.consumption, &vals.c, &vals.r),
                (1u8, &tangents.task_c, &vals.x_c, &vals.r_c),
                (2u8, &tangents.task_m, &vals.x_m, &vals.r_m),
            ] {
                for idx in 0..n {
                    let fam = &fams[idx];
                    let t = target[idx].clamp(fam.interval.0, fam.interval.1);
                    let k = fam.best_index(t);
                    let env = fam.line(k, t);
                    if aux[idx] < env - 1e-9 * (1.0 + env.abs()) {
                        added |= active.add_cut(kind, idx, fam.slopes[k], fam.intercepts[k]);
                    }
                }
            }

            if opts.include_ic {
                let mut cands: Vec<(f64, u32)> = Vec::new();
                for (k, &(a, b)) in pairs.pairs.iter().enumerate() {
                    if active.has_ic(k) {
                        continue;
                    }
                    let (a, b) = (a as usize, b as usize);
                    let (pc, pm) = grid.p(a);
                    let resid = vals.c[a] - pc * vals.x_c[a] - pm * vals.x_m[a]
                        - (vals.c[b] - pc * vals.x_c[b] - pm * vals.x_m[b]);
                    if resid < -1e-9 {
                        cands.push((resid, k as u32));
                    }
                }
                if !cands.is_empty() {
                    cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
                    for &(_, k) in cands.iter().take(opts.ic_batch) {
                        added |= active.add_ic(k as usize);
                    }
                }
            }
            if !added {
                break;
            }
            if lp_solves > opts.max_inner_rounds {
                return Err(Error::NoConvergence(format!(
                    "row generation exceeded {} rounds at refinement iteration {iteration}",
                    opts.max_inner_rounds
                )));
            }
        }

        // Remember the raw solution for the pool-pruning heuristic.
        last_vals = Some(NodeValues {
            c: vals.c.clone(),
            x_c: vals.x_c.clone(),
            x_m: vals.x_m.clone(),
            r: vals.r.clone(),
            r_c: vals.r_c.clone(),
            r_m: vals.r_m.clone(),
        });

        // With linear consumption and no outside-option rows the split of
        // consumption across nodes is a degenerate direction: only the
        // mass-weighted total is pinned by promise keeping. Canonicalize to
        // the uniform-consumption representative (the closed-form one).
        if linear_c && !opts.include_outside {
            let mut total = 0.0;
            for idx in 0..n {
                let (pc, pm) = grid.p(idx);
                total += grid.mass(idx) * (pc * vals.x_c[idx] + pm * vals.x_m[idx]);
            }
            let c_bar = params.promised_welfare + total;
            for idx in 0..n {
                vals.c[idx] = c_bar;
                vals.r[idx] = c_bar;
            }
        }
        // Guard boxes for a linear consumption cost must never bind.
        if linear_c {
            for idx in 0..n {
                let (lo, hi) = boxes.c[idx];
                let w = hi - lo;
                if vals.c[idx] < lo + 1e-6 * w || vals.c[idx] > hi - 1e-6 * w {
                    return Err(Error::Numeric(format!(
                        "consumption guard bound binds at node {idx}; instance is badly scaled"
                    )));
                }
            }
        }

        let (eps_c_ach, eps_tc_ach, eps_tm_ach) = tangents.achieved_totals(z);
        let achieved_total = eps_c_ach + eps_tc_ach + eps_tm_ach;
        let alloc_now = AllocationField::new(
            grid.n_c,
            grid.n_m,
            vals.c.clone(),
            vals.x_c.iter().map(|&v| v.max(0.0)).collect(),
            vals.x_m.iter().map(|&v| v.max(0.0)).collect(),
            z.to_vec(),
        )?;
        let report = proper_check(&alloc_now, &boxes, !linear_c);
        if std::env::var("MDTAX_TRACE").is_ok() && !report.proper {
            let ups = report.binding.iter().filter(|b| b.2).count();
            let downs = report.binding.len() - ups;
            eprintln!("  it {iteration}: non-proper, {ups} upper / {downs} lower binds, first: {:?}", &report.binding[..report.binding.len().min(4)]);
        }
        let cost_now = true_cost(grid, z, costs, &vals);
        history.push(IterationRecord {
            iteration,
            requested_eps_c: eps_c,
            requested_eps_task: eps_task,
            achieved_eps_total: achieved_total,
            lp_objective,
            true_cost: cost_now,
            proper: report.proper,
            rows,
            lp_solves,
            pivots,
        });

        if report.proper && achieved_total <= opts.target_eps {
            let state = RefinementState {
                eps_c,
                eps_task,
                boxes,
                iteration,
                proper: true,
                history,
            };
            return Ok(FixedAssignmentResult {
                alloc: alloc_now,
                lambda,
                outside_duals,
                state,
                lp_objective,
                true_cost: cost_now,
            });
        }

        if report.proper {
            // Shrink precision and recenter boxes around the solution. A
            // width floor relative to the anchor scale keeps the tangent
            // rows from degenerating into near-parallel constraints at very
            // deep refinement, including for nodes parked at zero tasks.
            eps_c *= opts.shrink;
            eps_task *= opts.shrink;
            let f = opts.recenter_fraction;
            for idx in 0..n {
                if !linear_c {
                    let (lo, hi) = boxes.c[idx];
                    let half = (f * (hi - lo)).max(1e-6 * (1.0 + anchor_c.abs()));
                    boxes.c[idx] = ((vals.c[idx] - half).max(0.0), vals.c[idx] + half);
                }
                for (bx, v, anchor) in [
                    (&mut boxes.x_c[idx], vals.x_c[idx], anchor_xc[idx]),
                    (&mut boxes.x_m[idx], vals.x_m[idx], anchor_xm[idx]),
                ] {
                    let half = (f * (bx.1 - bx.0)).max(1e-6 * (1.0 + anchor));
                    *bx = ((v - half).max(0.0), (v + half).max(1e-12));
                }
            }
        } else {
            // Relax only the binding sides, doubling the width outward.
            for &(idx, var, at_upper) in &report.binding {
                let bx = match var {
                    BoxVar::C => &mut boxes.c[idx],
                    BoxVar::Xc => &mut boxes.x_c[idx],
                    BoxVar::Xm => &mut boxes.x_m[idx],
                };
                let w = bx.1 - bx.0;
                if at_upper {
                    bx.1 += w;
                } else {
                    bx.0 = match var {
                        BoxVar::C => bx.0 - w,
                        _ => (bx.0 - w).max(0.0),
                    };
                }
            }
        }
    }

    let tail: Vec<String> = history
        .iter()
        .rev()
        .take(3)
        .map(|r| {
            format!(
                "iter {}: eps_total {:.3e}, proper {}, rows {}",
                r.iteration, r.achieved_eps_total, r.proper, r.rows
            )
        })
        .collect();
    Err(Error::NoConvergence(format!(
        "refinement did not reach eps target {:.3e} within {} iterations ({})",
        opts.target_eps,
        opts.max_iterations,
        tail.join("; ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpacing;
    use crate::planner::benchmark::benchmark_closed_form;
    use crate::planner::pairs::enumerate_irreducible;

    fn quick_opts() -> RefineOptions {
        RefineOptions {
            target_eps: 1e-5,
            initial_eps: 1e-2,
            ..RefineOptions::default()
        }
    }

    #[test]
    fn proper_check_examples() {
        let boxes = Boxes {
            c: vec![(0.0, 2.0)],
            x_c: vec![(0.0, 2.0)],
            x_m: vec![(1.0, 2.0)],
        };
        let mk = |c: f64, xc: f64, xm: f64| {
            AllocationField::new(1, 1, vec![c], vec![xc], vec![xm], vec![1.0]).unwrap()
        };
        // Interior solution.
        let rep = proper_check(&mk(1.0, 1.0, 1.5), &boxes, true);
        assert!(rep.proper && rep.binding.is_empty());
        // Consumption at its upper bound.
        let rep = proper_check(&mk(2.0, 1.0, 1.5), &boxes, true);
        assert!(!rep.proper);
        assert_eq!(rep.binding[0], (0, BoxVar::C, true));
        // A task at a zero lower bound stays proper.
        let rep = proper_check(&mk(1.0, 0.0, 1.5), &boxes, true);
        assert!(rep.proper);
        // But a positive lower bound binds.
        let rep = proper_check(&mk(1.0, 1.0, 1.0), &boxes, true);
        assert!(!rep.proper);
        assert_eq!(rep.binding[0], (0, BoxVar::Xm, false));
    }

    #[test]
    fn benchmark_mode_matches_closed_form() {
        // ICs and outside options off on a uniform 2x2 grid: the LP must
        // land on the closed form within the achieved approximation total.
        let params = ModelParams::calibrated().with_promised_welfare(0.2);
        let grid = SkillGrid::regular(
            (2, 2),
            (1.0, 1.6),
            (1.0, 1.6),
            GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let z = vec![1.0; 4];
        let pairs = enumerate_irreducible(&grid, None);
        let opts = quick_opts().benchmark_mode();
        let res = solve_fixed_assignment(&grid, &z, &params, &costs, &pairs, &opts).unwrap();
        let bench = benchmark_closed_form(&grid, &z, &params, &costs).unwrap();
        let bench_cost = {
            let mut t = 0.0;
            for idx in 0..4 {
                t += grid.mass(idx)
                    * (bench.c[idx]
                        + z[idx]
                            * (costs.task.value(bench.x_c[idx]) + costs.task.value(bench.x_m[idx])));
            }
            t
        };
        let eps = res.state.history.last().unwrap().achieved_eps_total;
        assert!(
            (res.true_cost - bench_cost).abs() <= 2.0 * eps + 1e-9,
            "true cost {} vs benchmark {} (eps {eps})",
            res.true_cost,
            bench_cost
        );
        // The multiplier on promise keeping is 1 under linear consumption
        // with slack outside options.
        assert!((res.lambda - 1.0).abs() < 1e-6, "lambda = {}", res.lambda);
    }

    #[test]
    fn chain_grid_satisfies_all_pairwise_ics() {
        // Irreducible rows only, then verify every ordered pairwise
        // constraint, including the reducible ones.
        let params = ModelParams::calibrated().with_promised_welfare(0.4);
        let grid = SkillGrid::regular(
            (1, 6),
            (1.0, 1.0),
            (0.9, 1.8),
            GridSpacing::Geometric,
            &params,
        )
        .unwrap();
        // Mild bimodal masses.
        let masses = {
            let raw = [3.0, 1.0, 0.5, 0.5, 1.0, 3.0];
            let s: f64 = raw.iter().sum();
            raw.iter().map(|m| m / s).collect::<Vec<_>>()
        };
        let grid = grid.with_density(masses).unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let z = vec![1.0; 6];
        let pairs = enumerate_irreducible(&grid, None);
        let res =
            solve_fixed_assignment(&grid, &z, &params, &costs, &pairs, &quick_opts()).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                if a == b {
                    continue;
                }
                let (pc, pm) = grid.p(a);
                let ua = res.alloc.c[a] - pc * res.alloc.x_c[a] - pm * res.alloc.x_m[a];
                let ub_at_a = res.alloc.c[b] - pc * res.alloc.x_c[b] - pm * res.alloc.x_m[b];
                assert!(
                    ua >= ub_at_a - 1e-6,
                    "pairwise IC {a}->{b} violated: {ua} < {ub_at_a}"
                );
            }
        }
    }

    #[test]
    fn lazy_and_full_assembly_agree() {
        let params = ModelParams::calibrated().with_promised_welfare(0.3);
        let grid = SkillGrid::regular(
            (3, 3),
            (1.0, 1.7),
            (1.0, 1.7),
            GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let costs = CostFunctions::linear_consumption(&params);
        let z = vec![1.0; 9];
        let pairs = enumerate_irreducible(&grid, None);
        let lazy = solve_fixed_assignment(&grid, &z, &params, &costs, &pairs, &quick_opts())
            .unwrap();
        let full_opts = RefineOptions {
            lazy: false,
            ..quick_opts()
        };
        let full =
            solve_fixed_assignment(&grid, &z, &params, &costs, &pairs, &full_opts).unwrap();
        assert!(
            (lazy.true_cost - full.true_cost).abs() <= 1e-7 * (1.0 + full.true_cost.abs()),
            "lazy {} vs full {}",
            lazy.true_cost,
            full.true_cost
        );
    }
}
