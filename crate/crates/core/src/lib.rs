//! Solver and analysis toolkit for the multidimensional nonlinear
//! optimal-taxation problem with bunching.
//!
//! The crate discretizes a two-dimensional worker-type space, linearizes the
//! planner's convex program through families of Legendre tangents into a
//! sparse linear program, solves it with iterative precision and boundary
//! refinement plus an outer assignment iteration, and provides diagnostics:
//! bunching maps, tax wedges, Euler-Lagrange residuals and stochastic
//! dominance checks. It also implements the positive economy used for
//! calibration and pointwise skill identification from earnings records.
//!
//! Module map:
//!
//! * [`grid`], [`cost`], [`field`] - domain types, coordinate transforms and
//!   convex resource costs with their conjugates;
//! * [`positive`], [`kde`], [`stats`] - equilibrium wages, worker optimum,
//!   skill identification and density smoothing;
//! * [`lp`] - sparse linear programs, a deterministic revised-simplex
//!   reference solver, and MPS / LP-text export;
//! * [`planner`] - tangent families, irreducible incentive constraints, LP
//!   assembly, the refinement loop and the assignment iteration;
//! * [`analysis`] - bunching detection and classification, wedges,
//!   optimality-condition residuals and dominance checks.

pub mod analysis;
pub mod cost;
pub mod error;
pub mod field;
pub mod grid;
pub mod kde;
pub mod lp;
pub mod params;
pub mod planner;
pub mod positive;
pub mod stats;

pub use error::{Error, Result};
pub use field::{discrete_convexity_check, indirect_utility_field, AllocationField};
pub use grid::{alpha_to_p, p_to_alpha, GridSpacing, SkillGrid};
pub use params::ModelParams;
