//! Error type shared by all modules of the crate.

use std::fmt;

/// Errors produced by solver and analysis routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input value is outside the mathematical domain of an operation
    /// (e.g. a non-positive skill passed to a power transform).
    Domain(String),
    /// Structurally invalid arguments: shape mismatches, empty inputs,
    /// malformed linear programs.
    Argument(String),
    /// A numerical routine failed to converge; the message carries the
    /// residual report.
    Numeric(String),
    /// A resource cap was exceeded (e.g. the tangent-family size limit).
    Resource(String),
    /// The constraint system admits no solution.
    Infeasible(String),
    /// An iterative procedure hit its iteration cap without converging.
    NoConvergence(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Argument(m) => write!(f, "argument error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::Resource(m) => write!(f, "resource error: {m}"),
            Error::Infeasible(m) => write!(f, "infeasible: {m}"),
            Error::NoConvergence(m) => write!(f, "no convergence: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
