pub mod analyze;
pub mod benchmark;
pub mod export;
pub mod identify;
pub mod solve;

use crate::config::RunConfig;
use crate::CliError;
use std::path::{Path, PathBuf};

/// Output directory resolution: the `--out` flag wins, then the
/// `MDTAX_OUT` environment variable, then the config, then `./out`.
pub fn resolve_out_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("MDTAX_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    cfg.io
        .out_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Every run echoes its fully resolved configuration next to the outputs.
pub fn echo_config(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    crate::io::write_text(&out_dir.join("resolved_config.toml"), &cfg.to_toml())
}
