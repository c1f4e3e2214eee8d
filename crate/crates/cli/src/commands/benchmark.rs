//! Closed-form unconstrained benchmark on the configured grid.

use crate::config::RunConfig;
use crate::io::{fmt_f64, write_json, CsvTable};
use crate::CliError;
use mdtax::planner::benchmark_closed_form;
use serde_json::json;
use std::path::Path;

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let base = cfg.params_with_welfare(0.0).map_err(CliError::from_core)?;
    let grid = cfg.build_grid(&base)?;
    let grid = match cfg.build_density(&grid)? {
        Some(mass) => grid.with_density(mass).map_err(CliError::from_core)?,
        None => grid,
    };
    let welfare = cfg.resolve_welfare(&grid, &base)?;
    let params = base.with_promised_welfare(welfare);
    let costs = cfg.costs(&params);
    // The benchmark removes firm heterogeneity.
    let z = vec![1.0; grid.node_count()];
    let alloc = benchmark_closed_form(&grid, &z, &params, &costs).map_err(CliError::from_core)?;

    let mut t = CsvTable::new(&[
        "alpha_c", "alpha_m", "p_c", "p_m", "mass", "c", "x_c", "x_m", "x_c_phys", "x_m_phys",
        "z", "u",
    ]);
    let mut true_cost = 0.0;
    for idx in 0..grid.node_count() {
        let (ac, am) = grid.alpha(idx);
        let (pc, pm) = grid.p(idx);
        let u = alloc.c[idx] - pc * alloc.x_c[idx] - pm * alloc.x_m[idx];
        true_cost += grid.mass(idx)
            * (costs.consumption.value(alloc.c[idx])
                + z[idx] * (costs.task.value(alloc.x_c[idx]) + costs.task.value(alloc.x_m[idx])));
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
            fmt_f64(z[idx]),
            fmt_f64(u),
        ]);
    }
    t.write_to(&out_dir.join("benchmark.csv"))?;
    write_json(
        &out_dir.join("benchmark.json"),
        &json!({
            "promised_welfare": params.promised_welfare,
            "true_cost": true_cost,
            "lambda": 1.0,
        }),
    )?;
    super::echo_config(cfg, out_dir)?;
    Ok(())
}
