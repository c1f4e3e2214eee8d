//! Assembly of the approximate planner problem as a sparse linear program.
//!
//! Per node the variables are consumption utility `c`, task disutilities
//! `x_c`, `x_m`, and the auxiliary epigraph variables `r`, `r_c`, `r_m` that
//! carry the linearized resource costs. The objective integrates
//! `r + z (r_c + r_m)` against the node masses; constraints are the tangent
//! rows of each cost family, the ordered incentive-compatibility rows, the
//! outside-option rows, the promise-keeping row, and the location boxes.

use crate::cost::CostFunctions;
use crate::error::{Error, Result};
use crate::grid::SkillGrid;
use crate::lp::{LinearProgram, Relation};
use crate::params::ModelParams;
use crate::planner::pairs::IrreduciblePairSet;
use crate::planner::tangent::TangentFamily;

pub const VARS_PER_NODE: usize = 6;
pub const V_C: usize = 0;
pub const V_XC: usize = 1;
pub const V_XM: usize = 2;
pub const V_R: usize = 3;
pub const V_RC: usize = 4;
pub const V_RM: usize = 5;

/// Per-node location boxes for the choice variables.
#[derive(Debug, Clone)]
pub struct Boxes {
    pub c: Vec<(f64, f64)>,
    pub x_c: Vec<(f64, f64)>,
    pub x_m: Vec<(f64, f64)>,
}

/// Tangent families per node for the three convex costs.
#[derive(Debug, Clone)]
pub struct TangentSet {
    pub consumption: Vec<TangentFamily>,
    pub task_c: Vec<TangentFamily>,
    pub task_m: Vec<TangentFamily>,
}

impl TangentSet {
    /// Paper-style achieved error totals: the consumption error plus the
    /// project-value-weighted task errors, each maxed over nodes.
    pub fn achieved_totals(&self, z: &[f64]) -> (f64, f64, f64) {
        let eps_c = self
            .consumption
            .iter()
            .fold(0.0f64, |a, f| a.max(f.achieved_eps));
        let mut eps_tc = 0.0f64;
        let mut eps_tm = 0.0f64;
        for idx in 0..z.len() {
            eps_tc = eps_tc.max(z[idx] * self.task_c[idx].achieved_eps);
            eps_tm = eps_tm.max(z[idx] * self.task_m[idx].achieved_eps);
        }
        (eps_c, eps_tc, eps_tm)
    }
}

/// Everything that defines the planner instance apart from tangents/boxes.
#[derive(Debug, Clone, Copy)]
pub struct PlannerSpec<'a> {
    pub grid: &'a SkillGrid,
    pub z: &'a [f64],
    pub params: &'a ModelParams,
    pub costs: CostFunctions,
    /// Include the incentive-compatibility rows (off in benchmark mode).
    pub include_ic: bool,
    /// Include the outside-option rows (off in benchmark mode).
    pub include_outside: bool,
}

impl<'a> PlannerSpec<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.z.len() != self.grid.node_count() {
            return Err(Error::Argument(format!(
                "assignment has {} entries, expected {}",
                self.z.len(),
                self.grid.node_count()
            )));
        }
        if self.z.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Argument("project values must be positive".into()));
        }
        Ok(())
    }
}

/// One lazily activated row. Tangent cuts carry their line literally, so
/// they stay valid lower-bounding rows across refinement iterations even
/// after the families that produced them are rebuilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PoolRow {
    /// Epigraph cut `aux >= slope * target - intercept` for cost `kind`
    /// (0 consumption, 1 task_c, 2 task_m) at a node.
    Cut {
        kind: u8,
        node: u32,
        slope: f64,
        intercept: f64,
    },
    /// Ordered incentive pair, by index into the pair set.
    Ic { pair: u32 },
}

/// Activation-ordered row pool. Rows are only appended, so LP row indices
/// stay stable across re-solves and basis snapshots stay valid; `reset`
/// starts a fresh pool when the caller prunes.
#[derive(Debug, Clone, Default)]
pub(crate) struct ActiveRows {
    pub rows: Vec<PoolRow>,
    seen_cuts: std::collections::HashSet<(u8, u32, u64)>,
    ic_mask: Vec<bool>,
}

impl ActiveRows {
    pub fn new(n_pairs: usize) -> Self {
        ActiveRows {
            rows: Vec::new(),
            seen_cuts: Default::default(),
            ic_mask: vec![false; n_pairs],
        }
    }

    /// Returns true when the cut was newly added.
    pub fn add_cut(&mut self, kind: u8, node: usize, slope: f64, intercept: f64) -> bool {
        if self.seen_cuts.insert((kind, node as u32, slope.to_bits())) {
            self.rows.push(PoolRow::Cut {
                kind,
                node: node as u32,
                slope,
                intercept,
            });
            true
        } else {
            false
        }
    }

    pub fn add_ic(&mut self, pair: usize) -> bool {
        if self.ic_mask[pair] {
            return false;
        }
        self.ic_mask[pair] = true;
        self.rows.push(PoolRow::Ic { pair: pair as u32 });
        true
    }

    pub fn has_ic(&self, pair: usize) -> bool {
        self.ic_mask[pair]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Everything: all tangent lines of all families plus every pair.
    pub fn full(tangents: &TangentSet, pairs: &IrreduciblePairSet) -> Self {
        let n = tangents.consumption.len();
        let mut active = ActiveRows::new(pairs.len());
        for node in 0..n {
            for (kind, fams) in [
                (0u8, &tangents.consumption),
                (1u8, &tangents.task_c),
                (2u8, &tangents.task_m),
            ] {
                let fam = &fams[node];
                for line in 0..fam.len() {
                    active.add_cut(kind, node, fam.slopes[line], fam.intercepts[line]);
                }
            }
        }
        for pair in 0..pairs.len() {
            active.add_ic(pair);
        }
        active
    }
}

/// Row bookkeeping of an assembled planner LP.
#[derive(Debug, Clone)]
pub(crate) struct PlannerLp {
    pub lp: LinearProgram,
    pub pk_row: usize,
    /// Outside-option row per node (usize::MAX when not included).
    pub outside_rows: Vec<usize>,
}

pub(crate) fn assemble(
    spec: &PlannerSpec,
    tangents: &TangentSet,
    boxes: &Boxes,
    pairs: &IrreduciblePairSet,
    active: &ActiveRows,
) -> Result<PlannerLp> {
    spec.validate()?;
    let grid = spec.grid;
    let n = grid.node_count();
    for set in [&tangents.consumption, &tangents.task_c, &tangents.task_m] {
        if set.len() != n {
            return Err(Error::Argument("tangent set does not cover the grid".into()));
        }
    }
    // Every box must be covered by its family's interval.
    let cover = |fam: &TangentFamily, b: (f64, f64), what: &str, idx: usize| -> Result<()> {
        if b.0 < fam.interval.0 - 1e-12 || b.1 > fam.interval.1 + 1e-12 {
            return Err(Error::Argument(format!(
                "box [{}, {}] of {what} at node {idx} is not covered by the tangent interval [{}, {}]",
                b.0, b.1, fam.interval.0, fam.interval.1
            )));
        }
        Ok(())
    };
    for idx in 0..n {
        if !spec.costs.consumption.is_linear() {
            cover(&tangents.consumption[idx], boxes.c[idx], "c", idx)?;
        }
        cover(&tangents.task_c[idx], boxes.x_c[idx], "x_c", idx)?;
        cover(&tangents.task_m[idx], boxes.x_m[idx], "x_m", idx)?;
    }

    let mut lp = LinearProgram::new();
    for idx in 0..n {
        let mass = grid.mass(idx);
        let z = spec.z[idx];
        lp.add_var(format!("c{idx}"), 0.0, boxes.c[idx].0, boxes.c[idx].1);
        lp.add_var(
            format!("xc{idx}"),
            0.0,
            boxes.x_c[idx].0.max(0.0),
            boxes.x_c[idx].1,
        );
        lp.add_var(
            format!("xm{idx}"),
            0.0,
            boxes.x_m[idx].0.max(0.0),
            boxes.x_m[idx].1,
        );
        lp.add_var(format!("r{idx}"), mass, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_var(
            format!("rc{idx}"),
            mass * z,
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
        lp.add_var(
            format!("rm{idx}"),
            mass * z,
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
    }

    let var = |idx: usize, k: usize| idx * VARS_PER_NODE + k;

    // Outside-option rows.
    let mut outside_rows = vec![usize::MAX; n];
    if spec.include_outside {
        for idx in 0..n {
            let (pc, pm) = grid.p(idx);
            let r = lp.add_row(
                format!("out{idx}"),
                vec![
                    (var(idx, V_C), 1.0),
                    (var(idx, V_XC), -pc),
                    (var(idx, V_XM), -pm),
                ],
                Relation::Ge,
                spec.params.outside_option,
            );
            outside_rows[idx] = r;
        }
    }

    // Promise keeping.
    let mut pk = Vec::new();
    for idx in 0..n {
        let mass = grid.mass(idx);
        if mass == 0.0 {
            continue;
        }
        let (pc, pm) = grid.p(idx);
        pk.push((var(idx, V_C), mass));
        pk.push((var(idx, V_XC), -mass * pc));
        pk.push((var(idx, V_XM), -mass * pm));
    }
    let pk_row = lp.add_row("pk", pk, Relation::Ge, spec.params.promised_welfare);

    // Dynamic rows in activation order: epigraph cuts `r >= slope t - conj`
    // and incentive rows `u(a) >= u(b at a's prices)`.
    for (seq, row) in active.rows.iter().enumerate() {
        match *row {
            PoolRow::Cut {
                kind,
                node,
                slope,
                intercept,
            } => {
                let idx = node as usize;
                let (target, aux) = match kind {
                    0 => (V_C, V_R),
                    1 => (V_XC, V_RC),
                    _ => (V_XM, V_RM),
                };
                lp.add_row(
                    format!("cut{seq}"),
                    vec![(var(idx, aux), 1.0), (var(idx, target), -slope)],
                    Relation::Ge,
                    -intercept,
                );
            }
            PoolRow::Ic { pair } => {
                if !spec.include_ic {
                    continue;
                }
                let (a, b) = pairs.pairs[pair as usize];
                let (a, b) = (a as usize, b as usize);
                let (pc, pm) = grid.p(a);
                lp.add_row(
                    format!("ic{a}.{b}"),
                    vec![
                        (var(a, V_C), 1.0),
                        (var(a, V_XC), -pc),
                        (var(a, V_XM), -pm),
                        (var(b, V_C), -1.0),
                        (var(b, V_XC), pc),
                        (var(b, V_XM), pm),
                    ],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }

    Ok(PlannerLp {
        lp,
        pk_row,
        outside_rows,
    })
}

/// Assemble the full approximate planner LP: every tangent of every family
/// and every ordered irreducible pair.
pub fn assemble_planner_lp(
    spec: &PlannerSpec,
    tangents: &TangentSet,
    boxes: &Boxes,
    pairs: &IrreduciblePairSet,
) -> Result<LinearProgram> {
    let active = ActiveRows::full(tangents, pairs);
    Ok(assemble(spec, tangents, boxes, pairs, &active)?.lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostFn;
    use crate::lp::{lp_solve, LpStatus, SolverOptions};
    use crate::planner::pairs::enumerate_irreducible;
    use crate::planner::tangent::build_tangents;

    fn single_node_setup(
        params: &ModelParams,
    ) -> (SkillGrid, Vec<f64>, TangentSet, Boxes, IrreduciblePairSet) {
        let grid = SkillGrid::new(vec![1.0], vec![1.0], vec![1.0], params).unwrap();
        let z = vec![1.0];
        let task = CostFn::Task { rho: params.rho };
        let tangents = TangentSet {
            consumption: vec![build_tangents(CostFn::Linear, (0.0, 10.0), 1e-6).unwrap()],
            task_c: vec![TangentFamily::single(task, 1.0, (0.0, 8.0)).unwrap()],
            task_m: vec![TangentFamily::single(task, 1.0, (0.0, 8.0)).unwrap()],
        };
        let boxes = Boxes {
            c: vec![(0.0, 10.0)],
            x_c: vec![(0.0, 8.0)],
            x_m: vec![(0.0, 8.0)],
        };
        let pairs = enumerate_irreducible(&grid, None);
        (grid, z, tangents, boxes, pairs)
    }

    #[test]
    fn single_node_pk_binds() {
        let mut params = ModelParams::calibrated();
        params.promised_welfare = 0.7;
        let (grid, z, tangents, boxes, pairs) = single_node_setup(&params);
        let spec = PlannerSpec {
            grid: &grid,
            z: &z,
            params: &params,
            costs: CostFunctions::linear_consumption(&params),
            include_ic: true,
            include_outside: true,
        };
        let lp = assemble_planner_lp(&spec, &tangents, &boxes, &pairs).unwrap();
        assert_eq!(lp.num_vars(), 6);
        // outside + pk + three tangent rows; no IC pairs on one node.
        assert_eq!(lp.num_rows(), 5);
        let sol = lp_solve(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let (pc, pm) = grid.p(0);
        let u = sol.x[V_C] - pc * sol.x[V_XC] - pm * sol.x[V_XM];
        assert!(
            (u - 0.7).abs() < 1e-7,
            "promise keeping should bind exactly, u = {u}"
        );
    }

    #[test]
    fn symmetric_two_nodes_share_allocation() {
        // Two nodes with identical p and equal mass admit a symmetric
        // optimum; the deterministic solver must return identical rows.
        let params = ModelParams::calibrated().with_promised_welfare(0.5);
        // Grid coordinates must strictly increase, so "no heterogeneity" is
        // approximated by a vanishing separation; the allocations must then
        // agree to the same order.
        let grid = SkillGrid::new(
            vec![1.0],
            vec![1.0, 1.0 + 1e-6],
            vec![0.5, 0.5],
            &params,
        )
        .unwrap();
        let z = vec![1.0, 1.0];
        let task = CostFn::Task { rho: params.rho };
        let fam_task = build_tangents(task, (0.0, 8.0), 1e-4).unwrap();
        let fam_c = build_tangents(CostFn::Linear, (0.0, 10.0), 1e-6).unwrap();
        let tangents = TangentSet {
            consumption: vec![fam_c.clone(), fam_c],
            task_c: vec![fam_task.clone(), fam_task.clone()],
            task_m: vec![fam_task.clone(), fam_task],
        };
        let boxes = Boxes {
            c: vec![(0.0, 10.0); 2],
            x_c: vec![(0.0, 8.0); 2],
            x_m: vec![(0.0, 8.0); 2],
        };
        let pairs = enumerate_irreducible(&grid, None);
        let spec = PlannerSpec {
            grid: &grid,
            z: &z,
            params: &params,
            costs: CostFunctions::linear_consumption(&params),
            include_ic: true,
            include_outside: true,
        };
        let lp = assemble_planner_lp(&spec, &tangents, &boxes, &pairs).unwrap();
        let sol = lp_solve(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        for k in [V_XC, V_XM] {
            assert!(
                (sol.x[k] - sol.x[VARS_PER_NODE + k]).abs() < 1e-3,
                "near-identical nodes should get matching tasks: {} vs {}",
                sol.x[k],
                sol.x[VARS_PER_NODE + k]
            );
        }
    }

    #[test]
    fn three_by_three_row_count_formula() {
        let params = ModelParams::calibrated().with_promised_welfare(0.1);
        let grid = SkillGrid::regular(
            (3, 3),
            (1.0, 2.0),
            (1.0, 2.0),
            crate::grid::GridSpacing::Uniform,
            &params,
        )
        .unwrap();
        let z = vec![1.0; 9];
        let task = CostFn::Task { rho: params.rho };
        let fam_task = build_tangents(task, (0.0, 30.0), 1e-2).unwrap();
        let fam_c = build_tangents(CostFn::Linear, (0.0, 10.0), 1e-6).unwrap();
        let tangents = TangentSet {
            consumption: vec![fam_c; 9],
            task_c: vec![fam_task.clone(); 9],
            task_m: vec![fam_task.clone(); 9],
        };
        let boxes = Boxes {
            c: vec![(0.0, 10.0); 9],
            x_c: vec![(0.0, 30.0); 9],
            x_m: vec![(0.0, 30.0); 9],
        };
        let pairs = enumerate_irreducible(&grid, None);
        let spec = PlannerSpec {
            grid: &grid,
            z: &z,
            params: &params,
            costs: CostFunctions::linear_consumption(&params),
            include_ic: true,
            include_outside: true,
        };
        let lp = assemble_planner_lp(&spec, &tangents, &boxes, &pairs).unwrap();
        let tangent_rows = 9 * (1 + 2 * fam_task.len());
        // Uniform-in-alpha grids keep extra diagonal pairs relative to the
        // uniform-lattice count of 56; the formula counts whatever the
        // enumeration produced.
        let expected = pairs.len() + 9 + 1 + tangent_rows;
        assert_eq!(lp.num_rows(), expected);
        assert_eq!(lp.num_vars(), 54);
    }

    #[test]
    fn uncovered_box_is_rejected() {
        let params = ModelParams::calibrated();
        let (grid, z, tangents, mut boxes, pairs) = single_node_setup(&params);
        boxes.x_c[0] = (0.0, 100.0); // beyond the tangent interval
        let spec = PlannerSpec {
            grid: &grid,
            z: &z,
            params: &params,
            costs: CostFunctions::linear_consumption(&params),
            include_ic: true,
            include_outside: true,
        };
        assert!(assemble_planner_lp(&spec, &tangents, &boxes, &pairs).is_err());
    }
}
