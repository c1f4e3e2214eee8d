//! Sparse linear programs, a deterministic revised-simplex reference solver,
//! and export to standard interchange formats.
//!
//! The solver is adequate for desk-scale instances; the planner depends only
//! on the [`lp_solve`] / [`LpSolution`] contract, so an external solver can
//! substitute through [`lp_export`] plus result import.

pub mod format;
mod lu;
mod simplex;

use crate::error::{Error, Result};

/// Constraint relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// One sparse constraint row.
#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    /// `(variable index, coefficient)` pairs, strictly increasing in index.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A sparse linear program in minimization form with per-variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a variable with an objective coefficient and bounds; returns its
    /// index. Infinite bounds are allowed.
    pub fn add_var(&mut self, name: impl Into<String>, obj: f64, lower: f64, upper: f64) -> usize {
        self.var_names.push(name.into());
        self.objective.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.len() - 1
    }

    /// Add a constraint row. Coefficients need not be sorted; they are
    /// normalized here.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        mut coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        coeffs.sort_by_key(|&(j, _)| j);
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Structural well-formedness: finite coefficients, indices in range, no
    /// duplicate entries, consistent bounds, and every variable referenced by
    /// the objective or at least one row.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Argument("variable arrays have mismatched lengths".into()));
        }
        let mut referenced = vec![false; n];
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Argument(format!(
                    "objective coefficient of {} is not finite",
                    self.var_names[j]
                )));
            }
            if c != 0.0 {
                referenced[j] = true;
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::Argument(format!(
                    "bounds of {} contain NaN",
                    self.var_names[j]
                )));
            }
            if self.lower[j] > self.upper[j] {
                return Err(Error::Argument(format!(
                    "bounds of {} are crossed: [{}, {}]",
                    self.var_names[j], self.lower[j], self.upper[j]
                )));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::Argument(format!(
                    "right-hand side of {} is not finite",
                    row.name
                )));
            }
            let mut last: Option<usize> = None;
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(Error::Argument(format!(
                        "row {} references variable {j} out of range",
                        row.name
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Argument(format!(
                        "coefficient of variable {j} in row {} is not finite",
                        row.name
                    )));
                }
                if last == Some(j) {
                    return Err(Error::Argument(format!(
                        "row {} has duplicate entries for variable {j}",
                        row.name
                    )));
                }
                last = Some(j);
                referenced[j] = true;
            }
        }
        if let Some(j) = referenced.iter().position(|&r| !r) {
            return Err(Error::Argument(format!(
                "variable {} is referenced by neither the objective nor any row",
                self.var_names[j]
            )));
        }
        Ok(())
    }

    /// Objective value of a candidate point.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// Numerical breakdown; the solution fields are not trustworthy.
    Numerical,
}

/// Result of a solve: primal values, duals per constraint, and residuals.
///
/// Dual sign convention under minimization: `>=` rows carry nonnegative
/// duals, `<=` rows nonpositive ones, equality rows are unrestricted.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
    /// Maximum scaled primal constraint violation.
    pub max_primal_residual: f64,
    /// Maximum wrong-sign reduced cost over nonbasic variables.
    pub max_dual_residual: f64,
    /// Maximum scaled complementary-slackness product.
    pub complementarity: f64,
    pub iterations: usize,
}

/// Options controlling the reference solver.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Hard pivot cap; 0 means `20 (m + n) + 2000`.
    pub max_iterations: usize,
    /// Rebuild the basis factorization after this many pivots.
    pub refactor_every: usize,
    /// Apply geometric-mean row/column equilibration before solving.
    pub scale: bool,
    /// Consecutive degenerate pivots before the Bland's-rule fallback engages.
    pub degeneracy_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 0,
            refactor_every: 100,
            scale: true,
            degeneracy_threshold: 200,
        }
    }
}

pub use simplex::WarmStart;

/// Solve with the reference revised simplex. Deterministic: identical inputs
/// and options produce bit-identical solutions.
pub fn lp_solve(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    lp.validate()?;
    simplex::solve(lp, opts)
}

/// Like [`lp_solve`], but accepts and returns a basis snapshot. The snapshot
/// accelerates re-solves of the same program extended by appended rows;
/// incompatible snapshots are ignored. Deterministic given identical inputs
/// including the snapshot.
pub fn lp_solve_warm(
    lp: &LinearProgram,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<(LpSolution, WarmStart)> {
    lp.validate()?;
    simplex::solve_warm(lp, opts, warm)
}

/// Export format for [`lp_export`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// Fixed-field MPS.
    Mps,
    /// CPLEX-style LP text.
    LpText,
}

/// Serialize a program deterministically; see [`format`] for the layouts.
pub fn lp_export(lp: &LinearProgram, fmt: ExportFormat) -> Result<Vec<u8>> {
    lp.validate()?;
    match fmt {
        ExportFormat::Mps => format::write_mps(lp),
        ExportFormat::LpText => format::write_lp_text(lp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_structural_problems() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0, 0.0, f64::INFINITY);
        lp.add_row("r0", vec![(x, 1.0)], Relation::Ge, 1.0);
        lp.validate().unwrap();

        let mut dup = lp.clone();
        dup.rows[0].coeffs = vec![(x, 1.0), (x, 2.0)];
        assert!(dup.validate().is_err());

        let mut unref = lp.clone();
        unref.add_var("ghost", 0.0, 0.0, 1.0);
        assert!(unref.validate().is_err());

        let mut nan = lp.clone();
        nan.rows[0].rhs = f64::NAN;
        assert!(nan.validate().is_err());

        let mut crossed = lp.clone();
        crossed.lower[0] = 2.0;
        crossed.upper[0] = 1.0;
        assert!(crossed.validate().is_err());
    }
}
