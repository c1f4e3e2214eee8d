//! Planner solve with the outer assignment iteration, checkpointing every
//! outer step so interrupted runs resume to bit-identical outputs.

use crate::config::RunConfig;
use crate::io::{fmt_f64, write_json, CsvTable};
use crate::CliError;
use mdtax::cost::CostFunctions;
use mdtax::field::AllocationField;
use mdtax::grid::SkillGrid;
use mdtax::lp::{lp_export, ExportFormat};
use mdtax::params::ModelParams;
use mdtax::planner::{
    assemble_planner_lp, build_tangents_capped, effective_skill, enumerate_irreducible,
    quantile_match, solve_fixed_assignment, Boxes, FirmDistribution, FixedAssignmentResult,
    PlannerSpec, TangentSet,
};
use serde_json::json;
use std::path::Path;

pub struct SolveFlags {
    pub no_ic: bool,
    pub resume: bool,
    pub dump_lp: bool,
    pub max_outer: Option<usize>,
}

pub struct SolveOutput {
    pub alloc: AllocationField,
    pub z: Vec<f64>,
    pub lambda: f64,
    pub converged_at: usize,
}

fn read_density_csv(path: &Path, grid: &SkillGrid) -> Result<Vec<f64>, CliError> {
    let table = CsvTable::read_from(path)?;
    let mass_col = table.column_index("mass", path)?;
    let ac_col = table.column_index("alpha_c", path)?;
    let am_col = table.column_index("alpha_m", path)?;
    if table.rows.len() != grid.node_count() {
        return Err(CliError::Config(format!(
            "density file has {} rows but the grid has {} nodes",
            table.rows.len(),
            grid.node_count()
        )));
    }
    let mut mass = Vec::with_capacity(grid.node_count());
    for k in 0..table.rows.len() {
        let (ac, am) = grid.alpha(k);
        let file_ac = table.f64_at(k, ac_col, path)?;
        let file_am = table.f64_at(k, am_col, path)?;
        if (file_ac - ac).abs() > 1e-9 * (1.0 + ac.abs())
            || (file_am - am).abs() > 1e-9 * (1.0 + am.abs())
        {
            return Err(CliError::Config(format!(
                "density row {} has coordinates ({file_ac}, {file_am}) but the grid expects ({ac}, {am})",
                k + 2
            )));
        }
        mass.push(table.f64_at(k, mass_col, path)?);
    }
    Ok(mass)
}

pub fn build_instance(
    cfg: &RunConfig,
) -> Result<(ModelParams, SkillGrid, CostFunctions, FirmDistribution), CliError> {
    let base_params = cfg.params_with_welfare(0.0).map_err(CliError::from_core)?;
    let grid = cfg.build_grid(&base_params)?;
    let grid = match cfg.build_density(&grid)? {
        Some(mass) => grid.with_density(mass).map_err(CliError::from_core)?,
        None => {
            let path = cfg.density.path.as_ref().ok_or_else(|| {
                CliError::Config("density.kind = csv needs density.path".to_string())
            })?;
            let mass = read_density_csv(Path::new(path), &grid)?;
            grid.with_density(mass).map_err(CliError::from_core)?
        }
    };
    let welfare = cfg.resolve_welfare(&grid, &base_params)?;
    let params = base_params.with_promised_welfare(welfare);
    let costs = cfg.costs(&params);
    let firms = cfg.build_firms(&grid, &params)?;
    Ok((params, grid, costs, firms))
}

fn alloc_table(grid: &SkillGrid, alloc: &AllocationField, params: &ModelParams) -> CsvTable {
    let mut t = CsvTable::new(&[
        "alpha_c", "alpha_m", "p_c", "p_m", "mass", "c", "x_c", "x_m", "x_c_phys", "x_m_phys",
        "z", "u",
    ]);
    for idx in 0..grid.node_count() {
        let (ac, am) = grid.alpha(idx);
        let (pc, pm) = grid.p(idx);
        let u = alloc.c[idx] - pc * alloc.x_c[idx] - pm * alloc.x_m[idx];
        t.push(vec![
            fmt_f64(ac),
            fmt_f64(am),
            fmt_f64(pc),
            fmt_f64(pm),
            fmt_f64(grid.mass(idx)),
            fmt_f64(alloc.c[idx]),
            fmt_f64(alloc.x_c[idx]),
            fmt_f64(alloc.x_m[idx]),
            fmt_f64(alloc.x_c[idx].powf(1.0 / params.rho)),
            fmt_f64(alloc.x_m[idx].powf(1.0 / params.rho)),
            fmt_f64(alloc.z[idx]),
            fmt_f64(u),
        ]);
    }
    t
}

fn refinement_table(res: &FixedAssignmentResult) -> CsvTable {
    let mut t = CsvTable::new(&[
        "iteration",
        "requested_eps_c",
        "requested_eps_task",
        "achieved_eps_total",
        "lp_objective",
        "true_cost",
        "proper",
        "rows",
        "lp_solves",
        "pivots",
    ]);
    for r in &res.state.history {
        t.push(vec![
            r.iteration.to_string(),
            fmt_f64(r.requested_eps_c),
            fmt_f64(r.requested_eps_task),
            fmt_f64(r.achieved_eps_total),
            fmt_f64(r.lp_objective),
            fmt_f64(r.true_cost),
            r.proper.to_string(),
            r.rows.to_string(),
            r.lp_solves.to_string(),
            r.pivots.to_string(),
        ]);
    }
    t
}

struct OuterState {
    iteration: usize,
    max_delta: f64,
    lambda: f64,
    lp_objective: f64,
    true_cost: f64,
    eps_total: f64,
    converged: bool,
}

fn checkpoint_dir(out_dir: &Path, k: usize) -> std::path::PathBuf {
    out_dir.join("checkpoints").join(format!("outer_{k:04}"))
}

fn write_checkpoint(
    out_dir: &Path,
    grid: &SkillGrid,
    params: &ModelParams,
    res: &FixedAssignmentResult,
    z_in: &[f64],
    z_next: &[f64],
    state: &OuterState,
) -> Result<(), CliError> {
    let dir = checkpoint_dir(out_dir, state.iteration);
    let mut zt = CsvTable::new(&["node", "z_in", "z_next"]);
    for idx in 0..grid.node_count() {
        zt.push(vec![
            idx.to_string(),
            fmt_f64(z_in[idx]),
            fmt_f64(z_next[idx]),
        ]);
    }
    zt.write_to(&dir.join("z.csv"))?;
    alloc_table(grid, &res.alloc, params).write_to(&dir.join("alloc.csv"))?;
    write_json(
        &dir.join("state.json"),
        &json!({
            "outer_iteration": state.iteration,
            "max_delta": state.max_delta,
            "lambda": state.lambda,
            "lp_objective": state.lp_objective,
            "true_cost": state.true_cost,
            "eps_total": state.eps_total,
            "converged": state.converged,
        }),
    )
}

struct LoadedCheckpoints {
    next_iter: usize,
    /// Assignment to start the next iteration from.
    z_next: Vec<f64>,
    /// Assignment the last completed iteration solved at.
    z_in: Vec<f64>,
    last_converged: bool,
    history: Vec<serde_json::Value>,
}

/// Load completed checkpoints in order; replay stops at the first
/// incomplete one.
fn load_checkpoints(
    out_dir: &Path,
    grid: &SkillGrid,
) -> Result<Option<LoadedCheckpoints>, CliError> {
    let root = out_dir.join("checkpoints");
    if !root.exists() {
        return Ok(None);
    }
    let mut ks: Vec<usize> = std::fs::read_dir(&root)
        .map_err(|e| CliError::Io(format!("read {}: {e}", root.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_prefix("outer_").map(|s| s.to_string()))
                .and_then(|s| s.parse::<usize>().ok())
        })
        .collect();
    ks.sort_unstable();
    let mut loaded: Option<LoadedCheckpoints> = None;
    for k in ks {
        let dir = checkpoint_dir(out_dir, k);
        let state_path = dir.join("state.json");
        let text = match std::fs::read_to_string(&state_path) {
            Ok(t) => t,
            Err(_) => break, // incomplete checkpoint: stop replay here
        };
        let state: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Io(format!("parse {}: {e}", state_path.display())))?;
        let zpath = dir.join("z.csv");
        let zt = CsvTable::read_from(&zpath)?;
        if zt.rows.len() != grid.node_count() {
            return Err(CliError::Config(format!(
                "checkpoint {k} does not match the configured grid"
            )));
        }
        let z_next_col = zt.column_index("z_next", &zpath)?;
        let z_in_col = zt.column_index("z_in", &zpath)?;
        let mut z_next = Vec::with_capacity(zt.rows.len());
        let mut z_in = Vec::with_capacity(zt.rows.len());
        for r in 0..zt.rows.len() {
            z_next.push(zt.f64_at(r, z_next_col, &zpath)?);
            z_in.push(zt.f64_at(r, z_in_col, &zpath)?);
        }
        let converged = state
            .get("converged")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        let mut history = loaded.map(|l| l.history).unwrap_or_default();
        history.push(state);
        loaded = Some(LoadedCheckpoints {
            next_iter: k + 1,
            z_next,
            z_in,
            last_converged: converged,
            history,
        });
    }
    Ok(loaded)
}

pub fn run(cfg: &RunConfig, out_dir: &Path, flags: &SolveFlags) -> Result<SolveOutput, CliError> {
    let (params, grid, costs, firms) = build_instance(cfg)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("mkdir {}: {e}", out_dir.display())))?;
    super::echo_config(cfg, out_dir)?;

    let worker_mass: f64 = grid.density.iter().sum();
    let firm_mass: f64 = firms.mass.iter().sum();
    if (firm_mass - worker_mass).abs() > 1e-9 {
        return Err(CliError::Config(format!(
            "firm mass {firm_mass} does not match worker mass {worker_mass}"
        )));
    }

    let max_offset = (cfg.solver.max_offset > 0).then_some(cfg.solver.max_offset);
    let pairs = enumerate_irreducible(&grid, max_offset);
    let refine_opts = cfg.refine_options(flags.no_ic);
    let max_outer = flags.max_outer.unwrap_or(cfg.assignment.max_outer);
    let tol = cfg.assignment.tol;
    let z_scale = firms.z.iter().fold(1.0f64, |a, &v| a.max(v.abs()));

    // Start fresh or from the last completed checkpoint.
    let mut start_iter = 0usize;
    let mut z = vec![firms.mean(); grid.node_count()];
    let mut outer_history: Vec<serde_json::Value> = Vec::new();
    let mut already_converged: Option<Vec<f64>> = None;
    if flags.resume {
        if let Some(loaded) = load_checkpoints(out_dir, &grid)? {
            start_iter = loaded.next_iter;
            z = loaded.z_next;
            outer_history = loaded.history;
            if loaded.last_converged {
                // The run had finished; re-derive the final solve from the
                // stored assignment (deterministically identical) instead of
                // stepping further.
                already_converged = Some(loaded.z_in);
            }
        }
    }

    let (res, converged_at) = if let Some(z_final) = already_converged {
        let res = solve_fixed_assignment(&grid, &z_final, &params, &costs, &pairs, &refine_opts)
            .map_err(CliError::from_core)?;
        (res, start_iter - 1)
    } else {
        let mut found: Option<(FixedAssignmentResult, usize)> = None;
        for outer in start_iter..max_outer {
            let res = solve_fixed_assignment(&grid, &z, &params, &costs, &pairs, &refine_opts)
                .map_err(CliError::from_core)?;
            let index = effective_skill(&res.alloc, &params);
            let z_next = quantile_match(&grid, &index, &firms);
            let max_delta = z
                .iter()
                .zip(&z_next)
                .fold(0.0f64, |a, (&old, &new)| a.max((new - old).abs()));
            let converged = max_delta <= tol * z_scale;
            let state = OuterState {
                iteration: outer,
                max_delta,
                lambda: res.lambda,
                lp_objective: res.lp_objective,
                true_cost: res.true_cost,
                eps_total: res
                    .state
                    .history
                    .last()
                    .map(|r| r.achieved_eps_total)
                    .unwrap_or(0.0),
                converged,
            };
            write_checkpoint(out_dir, &grid, &params, &res, &z, &z_next, &state)?;
            outer_history.push(json!({
                "outer_iteration": state.iteration,
                "max_delta": state.max_delta,
                "lambda": state.lambda,
                "lp_objective": state.lp_objective,
                "true_cost": state.true_cost,
                "eps_total": state.eps_total,
                "converged": state.converged,
            }));
            if converged {
                found = Some((res, outer));
                break;
            }
            z = z_next;
        }
        match found {
            Some(pair) => pair,
            None => {
                return Err(CliError::Numeric(format!(
                    "assignment did not converge within {max_outer} outer iterations; \
                     checkpoints retained in {}",
                    out_dir.join("checkpoints").display()
                )))
            }
        }
    };

    // Final artifacts.
    alloc_table(&grid, &res.alloc, &params).write_to(&out_dir.join("allocation.csv"))?;
    refinement_table(&res).write_to(&out_dir.join("refinement.csv"))?;
    let eps_total = res
        .state
        .history
        .last()
        .map(|r| r.achieved_eps_total)
        .unwrap_or(0.0);
    write_json(
        &out_dir.join("solution.json"),
        &json!({
            "lambda": res.lambda,
            "lp_objective": res.lp_objective,
            "true_cost": res.true_cost,
            "eps_total": eps_total,
            "promised_welfare": params.promised_welfare,
            "benchmark_mode": flags.no_ic,
            "outer_iterations": outer_history.len(),
            "outer_history": outer_history,
        }),
    )?;

    if flags.dump_lp {
        // Rebuild the final approximate LP in full and export it.
        let spec = PlannerSpec {
            grid: &grid,
            z: &res.alloc.z,
            params: &params,
            costs,
            include_ic: !flags.no_ic,
            include_outside: !flags.no_ic,
        };
        let state = &res.state;
        let mut tset = TangentSet {
            consumption: Vec::new(),
            task_c: Vec::new(),
            task_m: Vec::new(),
        };
        for idx in 0..grid.node_count() {
            tset.consumption.push(
                build_tangents_capped(costs.consumption, state.boxes.c[idx], state.eps_c, 100_000)
                    .map_err(CliError::from_core)?,
            );
            let eps_raw = state.eps_task / res.alloc.z[idx];
            tset.task_c.push(
                build_tangents_capped(costs.task, state.boxes.x_c[idx], eps_raw, 100_000)
                    .map_err(CliError::from_core)?,
            );
            tset.task_m.push(
                build_tangents_capped(costs.task, state.boxes.x_m[idx], eps_raw, 100_000)
                    .map_err(CliError::from_core)?,
            );
        }
        let boxes = Boxes {
            c: state.boxes.c.clone(),
            x_c: state.boxes.x_c.clone(),
            x_m: state.boxes.x_m.clone(),
        };
        let lp = assemble_planner_lp(&spec, &tset, &boxes, &pairs)
            .map_err(CliError::from_core)?;
        let bytes = lp_export(&lp, ExportFormat::Mps).map_err(CliError::from_core)?;
        std::fs::write(out_dir.join("final_lp.mps"), bytes)
            .map_err(|e| CliError::Io(format!("write final_lp.mps: {e}")))?;
    }

    Ok(SolveOutput {
        z: res.alloc.z.clone(),
        lambda: res.lambda,
        alloc: res.alloc,
        converged_at,
    })
}
