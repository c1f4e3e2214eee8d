//! Standalone export of the initial approximate planner LP.

use crate::commands::solve::build_instance;
use crate::config::RunConfig;
use crate::CliError;
use mdtax::lp::{lp_export, ExportFormat};
use mdtax::planner::{
    assemble_planner_lp, build_tangents_capped, enumerate_irreducible, Boxes, PlannerSpec,
    TangentSet, TANGENT_CAP,
};
use std::path::Path;

pub fn run(cfg: &RunConfig, format: ExportFormat, out_path: &Path) -> Result<(), CliError> {
    let (params, grid, costs, firms) = build_instance(cfg)?;
    let z = vec![firms.mean(); grid.node_count()];
    let pairs = enumerate_irreducible(
        &grid,
        (cfg.solver.max_offset > 0).then_some(cfg.solver.max_offset),
    );
    // Initial boxes from the anchor allocation, mirroring the refinement
    // loop's starting state.
    let rho = params.rho;
    let kr = params.kappa_rho();
    let n = grid.node_count();
    let mut boxes = Boxes {
        c: Vec::with_capacity(n),
        x_c: Vec::with_capacity(n),
        x_m: Vec::with_capacity(n),
    };
    let mut tset = TangentSet {
        consumption: Vec::with_capacity(n),
        task_c: Vec::with_capacity(n),
        task_m: Vec::with_capacity(n),
    };
    let mut pk_cost = 0.0;
    let mut anchors = Vec::with_capacity(n);
    for idx in 0..n {
        let (ac, am) = grid.alpha(idx);
        let xc = (z[idx] * ac.powf(rho) / kr).powf(rho / (rho - 2.0));
        let xm = (z[idx] * am.powf(rho) / kr).powf(rho / (rho - 2.0));
        let (pc, pm) = grid.p(idx);
        pk_cost += grid.mass(idx) * (pc * xc + pm * xm);
        anchors.push((xc, xm));
    }
    let c_scale = (params.promised_welfare + pk_cost).abs() + 1.0;
    for idx in 0..n {
        let (xc, xm) = anchors[idx];
        let cb = (-1e3 * c_scale, 1e3 * c_scale);
        boxes.c.push(cb);
        boxes.x_c.push((0.0, (3.0 * xc).max(1e-9)));
        boxes.x_m.push((0.0, (3.0 * xm).max(1e-9)));
        tset.consumption.push(
            build_tangents_capped(costs.consumption, cb, cfg.solver.initial_eps, TANGENT_CAP)
                .map_err(CliError::from_core)?,
        );
        let eps_raw = cfg.solver.initial_eps / z[idx];
        tset.task_c.push(
            build_tangents_capped(costs.task, boxes.x_c[idx], eps_raw, TANGENT_CAP)
                .map_err(CliError::from_core)?,
        );
        tset.task_m.push(
            build_tangents_capped(costs.task, boxes.x_m[idx], eps_raw, TANGENT_CAP)
                .map_err(CliError::from_core)?,
        );
    }
    let spec = PlannerSpec {
        grid: &grid,
        z: &z,
        params: &params,
        costs,
        include_ic: true,
        include_outside: true,
    };
    let lp = assemble_planner_lp(&spec, &tset, &boxes, &pairs).map_err(CliError::from_core)?;
    let bytes = lp_export(&lp, format).map_err(CliError::from_core)?;
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("mkdir {}: {e}", parent.display())))?;
    }
    std::fs::write(out_path, bytes)
        .map_err(|e| CliError::Io(format!("write {}: {e}", out_path.display())))?;
    Ok(())
}
