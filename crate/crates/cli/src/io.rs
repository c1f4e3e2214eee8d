//! CSV emission and parsing helpers. Floats are written with 17 significant
//! digits so every value survives a round trip bit-for-bit.

use crate::CliError;
use std::io::Write;
use std::path::Path;

/// 17-significant-digit scientific form; lossless for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, path: &Path) -> Result<(), CliError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("mkdir {}: {e}", parent.display())))?;
        }
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path)
            .map_err(|e| CliError::Io(format!("create {}: {e}", path.display())))?;
        f.write_all(out.as_bytes())
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Io(format!("{} is empty", path.display())))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
        }
        Ok(CsvTable { header, rows })
    }

    pub fn column_index(&self, name: &str, path: &Path) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| {
                CliError::Io(format!(
                    "{} is missing the required column {name:?} (columns: {})",
                    path.display(),
                    self.header.join(", ")
                ))
            })
    }

    pub fn f64_at(&self, row: usize, col: usize, path: &Path) -> Result<f64, CliError> {
        self.rows[row][col].parse::<f64>().map_err(|_| {
            CliError::Io(format!(
                "{} row {}: {:?} is not a number",
                path.display(),
                row + 2,
                self.rows[row][col]
            ))
        })
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("mkdir {}: {e}", parent.display())))?;
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize json: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("mkdir {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    Ok(())
}
