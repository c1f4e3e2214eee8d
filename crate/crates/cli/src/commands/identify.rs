//! Identify skills from earnings records: winsorize the input columns,
//! invert each record, and smooth the identified skill cloud onto the grid.

use crate::config::RunConfig;
use crate::io::{fmt_f64, CsvTable};
use crate::CliError;
use mdtax::kde::{kde_smooth, SamplePoint};
use mdtax::positive::{identify_skills, IdentifiedWorker, WorkerRecord};
use mdtax::stats::{silverman_bandwidth, winsorize};
use std::path::Path;

pub struct IdentifyOutput {
    pub workers: Vec<(WorkerRecord, IdentifiedWorker)>,
    pub density: Vec<f64>,
    pub malformed: Vec<(usize, String)>,
}

/// Parse the record CSV (header required: wage, rel_intensity, optional
/// weight). Malformed rows are collected with their line numbers; more than
/// the configured share aborts.
pub fn read_records(
    path: &Path,
    max_malformed_share: f64,
) -> Result<(Vec<WorkerRecord>, Vec<(usize, String)>), CliError> {
    let table = CsvTable::read_from(path)?;
    let wage_col = table.column_index("wage", path)?;
    let ratio_col = table.column_index("rel_intensity", path)?;
    let weight_col = table.header.iter().position(|h| h == "weight");
    if table.rows.is_empty() {
        return Err(CliError::Io(format!(
            "{} holds a header but no records",
            path.display()
        )));
    }
    let mut records = Vec::with_capacity(table.rows.len());
    let mut malformed = Vec::new();
    for (k, row) in table.rows.iter().enumerate() {
        let line = k + 2; // 1-based, after the header
        let parse = || -> Result<WorkerRecord, String> {
            let need = wage_col.max(ratio_col).max(weight_col.unwrap_or(0));
            if row.len() <= need {
                return Err(format!("expected {} columns, got {}", need + 1, row.len()));
            }
            let wage: f64 = row[wage_col]
                .parse()
                .map_err(|_| format!("wage {:?} is not a number", row[wage_col]))?;
            let ratio: f64 = row[ratio_col]
                .parse()
                .map_err(|_| format!("rel_intensity {:?} is not a number", row[ratio_col]))?;
            let weight: f64 = match weight_col {
                Some(c) => row[c]
                    .parse()
                    .map_err(|_| format!("weight {:?} is not a number", row[c]))?,
                None => 1.0,
            };
            WorkerRecord::new(wage, ratio, weight).map_err(|e| e.to_string())
        };
        match parse() {
            Ok(r) => records.push(r),
            Err(msg) => malformed.push((line, msg)),
        }
    }
    let share = malformed.len() as f64 / table.rows.len() as f64;
    if share > max_malformed_share {
        let preview: Vec<String> = malformed
            .iter()
            .take(5)
            .map(|(l, m)| format!("line {l}: {m}"))
            .collect();
        return Err(CliError::Io(format!(
            "{:.1}% of rows are malformed (limit {:.1}%): {}",
            100.0 * share,
            100.0 * max_malformed_share,
            preview.join("; ")
        )));
    }
    if records.is_empty() {
        return Err(CliError::Io("no valid records".to_string()));
    }
    Ok((records, malformed))
}

pub fn run(cfg: &RunConfig, input: &Path, out_dir: &Path) -> Result<IdentifyOutput, CliError> {
    let params = cfg
        .params_with_welfare(0.0)
        .map_err(CliError::from_core)?;
    let grid = cfg.build_grid(&params)?;
    let (records, malformed) =
        read_records(input, cfg.identify.max_malformed_share)?;
    for (line, msg) in &malformed {
        eprintln!("skipping malformed line {line}: {msg}");
    }

    // Winsorize the observable columns, then invert record by record.
    let wages: Vec<f64> = records.iter().map(|r| r.wage).collect();
    let ratios: Vec<f64> = records.iter().map(|r| r.rel_intensity).collect();
    let wages = winsorize(&wages, cfg.identify.winsor_lower, cfg.identify.winsor_upper)
        .map_err(CliError::from_core)?;
    let ratios = winsorize(&ratios, cfg.identify.winsor_lower, cfg.identify.winsor_upper)
        .map_err(CliError::from_core)?;
    let mut workers = Vec::with_capacity(records.len());
    for (k, rec) in records.iter().enumerate() {
        let adjusted = WorkerRecord::new(wages[k], ratios[k], rec.weight)
            .map_err(CliError::from_core)?;
        let ided = identify_skills(&adjusted, &params).map_err(CliError::from_core)?;
        workers.push((adjusted, ided));
    }

    // Smooth the identified skills onto the grid.
    let points: Vec<SamplePoint> = workers
        .iter()
        .map(|(rec, w)| SamplePoint {
            alpha_c: w.alpha_c,
            alpha_m: w.alpha_m,
            weight: rec.weight,
        })
        .collect();
    let bandwidth = match cfg.density.bandwidth {
        Some([hc, hm]) => (hc, hm),
        None => {
            let ws: Vec<f64> = points.iter().map(|p| p.weight).collect();
            let hc = silverman_bandwidth(
                &points.iter().map(|p| p.alpha_c).collect::<Vec<_>>(),
                &ws,
            )
            .map_err(CliError::from_core)?;
            let hm = silverman_bandwidth(
                &points.iter().map(|p| p.alpha_m).collect::<Vec<_>>(),
                &ws,
            )
            .map_err(CliError::from_core)?;
            (hc, hm)
        }
    };
    let density = kde_smooth(&points, &grid, bandwidth).map_err(CliError::from_core)?;

    // Emit the worker table (stable column order) and the density grid.
    let mut table = CsvTable::new(&[
        "wage",
        "rel_intensity",
        "weight",
        "x_c",
        "x_m",
        "alpha_c",
        "alpha_m",
        "ell_c",
        "ell_m",
        "z",
    ]);
    for (rec, w) in &workers {
        table.push(vec![
            fmt_f64(rec.wage),
            fmt_f64(rec.rel_intensity),
            fmt_f64(rec.weight),
            fmt_f64(w.x_c),
            fmt_f64(w.x_m),
            fmt_f64(w.alpha_c),
            fmt_f64(w.alpha_m),
            fmt_f64(w.ell_c),
            fmt_f64(w.ell_m),
            fmt_f64(w.z),
        ]);
    }
    table.write_to(&out_dir.join("identified.csv"))?;

    let mut dens = CsvTable::new(&["alpha_c", "alpha_m", "p_c", "p_m", "mass"]);
    for idx in 0..grid.node_count() {
        let (ac, am) = grid.alpha(idx);
        let (pc, pm) = grid.p(idx);
        dens.push(vec![
            fmt_f64(ac),
            fmt_f64(am),
            fmt_f64(pc),
            fmt_f64(pm),
            fmt_f64(density[idx]),
        ]);
    }
    dens.write_to(&out_dir.join("density.csv"))?;
    super::echo_config(cfg, out_dir)?;

    Ok(IdentifyOutput {
        workers,
        density,
        malformed,
    })
}
