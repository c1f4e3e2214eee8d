//! Pipeline commands behind the `mdtax` binary: identification of skills
//! from earnings records, the planner solve with checkpointing, post-solve
//! analysis, the closed-form benchmark, and LP export.

pub mod commands;
pub mod config;
pub mod io;

use std::fmt;

/// Command errors carrying the process exit code: 2 for configuration
/// problems, 3 for numeric failures, 4 for IO.
#[derive(Debug, Clone)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn from_core(e: mdtax::Error) -> Self {
        match e {
            mdtax::Error::Domain(m) | mdtax::Error::Argument(m) => CliError::Config(m),
            mdtax::Error::Numeric(m)
            | mdtax::Error::Resource(m)
            | mdtax::Error::Infeasible(m)
            | mdtax::Error::NoConvergence(m) => CliError::Numeric(m),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
