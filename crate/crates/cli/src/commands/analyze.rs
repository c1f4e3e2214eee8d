//! Post-solution analysis of a solve bundle: bunching maps, tax wedges,
//! optimality-condition residuals, dominance checks, and a machine-readable
//! summary.

use crate::config::RunConfig;
use crate::io::{fmt_f64, write_json, CsvTable};
use crate::CliError;
use mdtax::analysis::{
    bunched_via_el, classify_bunching, detect_bunching, el_residual, general_abc_check_1d,
    wedges, BunchLabel, ElResidual, ThresholdPolicy, WedgeField,
};
use mdtax::field::AllocationField;
use mdtax::grid::SkillGrid;
use mdtax::planner::benchmark_closed_form;
use serde_json::json;
use std::path::Path;

pub struct AnalyzeOutput {
    pub bunched_mass: f64,
    pub blunt_share: f64,
    pub targeted_share: f64,
    pub lambda: f64,
}

fn read_bundle(
    bundle: &Path,
    grid: &SkillGrid,
) -> Result<(AllocationField, f64), CliError> {
    let alloc_path = bundle.join("allocation.csv");
    let table = CsvTable::read_from(&alloc_path)?;
    let cols = ["c", "x_c", "x_m", "z"]
        .iter()
        .map(|name| table.column_index(name, &alloc_path))
        .collect::<Result<Vec<_>, _>>()?;
    if table.rows.len() != grid.node_count() {
        return Err(CliError::Config(format!(
            "bundle allocation has {} rows but the grid has {} nodes",
            table.rows.len(),
            grid.node_count()
        )));
    }
    let mut c = Vec::new();
    let mut xc = Vec::new();
    let mut xm = Vec::new();
    let mut z = Vec::new();
    for r in 0..table.rows.len() {
        c.push(table.f64_at(r, cols[0], &alloc_path)?);
        xc.push(table.f64_at(r, cols[1], &alloc_path)?);
        xm.push(table.f64_at(r, cols[2], &alloc_path)?);
        z.push(table.f64_at(r, cols[3], &alloc_path)?);
    }
    let alloc = AllocationField::new(grid.n_c, grid.n_m, c, xc, xm, z)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let sol_path = bundle.join("solution.json");
    let text = std::fs::read_to_string(&sol_path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", sol_path.display())))?;
    let sol: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("parse {}: {e}", sol_path.display())))?;
    let lambda = sol
        .get("lambda")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| CliError::Io(format!("{} is missing field lambda", sol_path.display())))?;
    Ok((alloc, lambda))
}

fn residual_stats(res: &[ElResidual]) -> serde_json::Value {
    let vals: Vec<f64> = res.iter().filter_map(|r| r.value().map(f64::abs)).collect();
    let singular = res.iter().filter(|r| matches!(r, ElResidual::Singular)).count();
    if vals.is_empty() {
        return json!({ "interior": 0, "singular": singular });
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    json!({
        "interior": vals.len(),
        "singular": singular,
        "mean_abs": mean,
        "max_abs": max,
    })
}

/// Mean absolute wedge over the boundary strip of the top decile in a skill
/// dimension versus the rest of the grid.
fn top_strip_means(
    field: &[Option<f64>],
    grid: &SkillGrid,
    along_c: bool,
) -> (Option<f64>, Option<f64>) {
    let n_axis = if along_c { grid.n_c } else { grid.n_m };
    let cut = ((0.9 * n_axis as f64).ceil() as usize).min(n_axis - 1);
    let in_strip = |idx: usize| {
        let (i, j) = grid.coords(idx);
        (if along_c { i } else { j }) >= cut
    };
    let strip = WedgeField::mean_abs(field, (0..grid.node_count()).filter(|&i| in_strip(i)));
    let interior = WedgeField::mean_abs(field, (0..grid.node_count()).filter(|&i| !in_strip(i)));
    (strip, interior)
}

pub fn run(cfg: &RunConfig, bundle: &Path, out_dir: &Path) -> Result<AnalyzeOutput, CliError> {
    let params = cfg.params_with_welfare(0.0).map_err(CliError::from_core)?;
    let grid = cfg.build_grid(&params)?;
    // Node masses travel with the bundle's allocation table.
    let alloc_path = bundle.join("allocation.csv");
    let table = CsvTable::read_from(&alloc_path)?;
    let mass_col = table.column_index("mass", &alloc_path)?;
    let mut mass = Vec::with_capacity(grid.node_count());
    for r in 0..table.rows.len().min(grid.node_count()) {
        mass.push(table.f64_at(r, mass_col, &alloc_path)?);
    }
    let grid = if mass.len() == grid.node_count() {
        grid.with_density(mass).map_err(|e| CliError::Config(e.to_string()))?
    } else {
        grid
    };
    let (alloc, lambda) = read_bundle(bundle, &grid)?;
    let costs = cfg.costs(&params);

    // Bunching detection and classification.
    let mut report = detect_bunching(&alloc, &grid, cfg.analyze.bunch_rel_tol)
        .map_err(CliError::from_core)?;
    classify_bunching(&mut report, &grid);

    // Wedges in skill coordinates.
    let wedge = wedges(&alloc, &grid, &params, &costs).map_err(CliError::from_core)?;

    // Optimality-condition residuals, thresholded against benchmark-mode
    // noise on the same grid and assignment.
    let el_available = (grid.n_c == 1 || grid.n_c >= 3) && (grid.n_m == 1 || grid.n_m >= 3)
        && grid.node_count() >= 3;
    let (residuals, concordance) = if el_available {
        let residuals = el_residual(&alloc, &grid, lambda, &params, &costs)
            .map_err(CliError::from_core)?;
        let bench = benchmark_closed_form(&grid, &alloc.z, &params, &costs)
            .map_err(CliError::from_core)?;
        let bench_res = el_residual(&bench, &grid, 1.0, &params, &costs)
            .map_err(CliError::from_core)?;
        let policy = ThresholdPolicy::BenchmarkQuantile {
            quantile: cfg.analyze.el_threshold_quantile,
            multiplier: cfg.analyze.el_threshold_multiplier,
        };
        let conc = bunched_via_el(&residuals, &report.flags, policy, Some(&bench_res))
            .map_err(CliError::from_core)?;
        (Some(residuals), Some(conc))
    } else {
        (None, None)
    };

    // One-dimensional instances admit the cumulative dominance check.
    let abc = if (grid.n_c == 1) != (grid.n_m == 1) {
        match general_abc_check_1d(&alloc, &grid, lambda, &params, &costs, &report.flags, 1e-5)
        {
            Ok(v) => Some(json!({
                "holds": v.holds,
                "equality_on_separated": v.equality_on_separated,
                "min_slack": v.min_slack,
                "max_equality_gap": v.max_equality_gap,
            })),
            Err(e) => Some(json!({ "skipped": e.to_string() })),
        }
    } else {
        None
    };

    // Per-node table.
    let mut t = CsvTable::new(&[
        "alpha_c",
        "alpha_m",
        "p_c",
        "p_m",
        "mass",
        "c",
        "x_c",
        "x_m",
        "z",
        "u",
        "tau_c",
        "tau_m",
        "bunched",
        "class_id",
        "class_label",
        "el_residual",
    ]);
    let fmt_opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for idx in 0..grid.node_count() {
        let (ac, am) = grid.alpha(idx);
        let (pc, pm) = grid.p(idx);
        let u = alloc.c[idx] - pc * alloc.x_c[idx] - pm * alloc.x_m[idx];
        let label = report.class_of[idx]
            .and_then(|cid| report.classes[cid].label)
            .map(|l| match l {
                BunchLabel::Blunt => "blunt".to_string(),
                BunchLabel::Targeted => "targeted".to_string(),
            })
            .unwrap_or_default();
        let el = residuals
            .as_ref()
            .map(|res| match res[idx] {
                ElResidual::Value(v) => fmt_f64(v),
                ElResidual::Singular => "singular".to_string(),
                ElResidual::Boundary => String::new(),
            })
            .unwrap_or_default();
        t.push(vec![
            fmt_f64(ac),
            fmt_f64(am),
            fmt_f64(pc),
            fmt_f64(pm),
            fmt_f64(grid.mass(idx)),
            fmt_f64(alloc.c[idx]),
            fmt_f64(alloc.x_c[idx]),
            fmt_f64(alloc.x_m[idx]),
            fmt_f64(alloc.z[idx]),
            fmt_f64(u),
            fmt_opt(wedge.tau_c[idx]),
            fmt_opt(wedge.tau_m[idx]),
            report.flags[idx].to_string(),
            report.class_of[idx].map(|c| c.to_string()).unwrap_or_default(),
            label,
            el,
        ]);
    }
    t.write_to(&out_dir.join("analysis.csv"))?;

    let (strip_c, interior_c) = top_strip_means(&wedge.tau_c, &grid, true);
    let (strip_m, interior_m) = top_strip_means(&wedge.tau_m, &grid, false);

    let summary = json!({
        "lambda": lambda,
        "bunched_mass": report.bunched_mass,
        "blunt_share": report.blunt_share,
        "targeted_share": report.targeted_share,
        "n_classes": report.classes.len(),
        "n_edges": report.edges.len(),
        "bunch_rel_tol": report.rel_tol,
        "edge_law_max_product": edge_law_max(&report.edges, &grid),
        "wedge_top_strip": {
            "tau_c_strip_mean_abs": strip_c,
            "tau_c_interior_mean_abs": interior_c,
            "tau_m_strip_mean_abs": strip_m,
            "tau_m_interior_mean_abs": interior_m,
        },
        "el_residuals": residuals.as_ref().map(|r| residual_stats(r)),
        "el_concordance": concordance.as_ref().map(|c| json!({
            "threshold": c.threshold,
            "agreement": c.agreement,
            "compared": c.compared,
            "true_positive": c.true_positive,
            "false_positive": c.false_positive,
            "false_negative": c.false_negative,
            "true_negative": c.true_negative,
            "note": "threshold reconstructed from benchmark-mode residual quantiles; not a primary statistic",
        })),
        "abc_1d": abc,
        "classifier_note": "blunt/targeted labels reconstruct the comparative-advantage split from class geometry",
    });
    write_json(&out_dir.join("summary.json"), &summary)?;
    super::echo_config(cfg, out_dir)?;

    Ok(AnalyzeOutput {
        bunched_mass: report.bunched_mass,
        blunt_share: report.blunt_share,
        targeted_share: report.targeted_share,
        lambda,
    })
}

/// Largest product of skill increments over bunch edges; nonpositive when
/// every edge crosses comparative advantage.
fn edge_law_max(edges: &[(usize, usize)], grid: &SkillGrid) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &(a, b) in edges {
        let (ac, am) = grid.alpha(a);
        let (bc, bm) = grid.alpha(b);
        worst = worst.max((bc - ac) * (bm - am));
    }
    if edges.is_empty() {
        f64::NEG_INFINITY
    } else {
        worst
    }
}
