//! Planner-side machinery: tangent families, irreducible incentive pairs,
//! LP assembly, the precision/boundary refinement loop, the assignment
//! iteration, and the unconstrained benchmark.

mod assemble;
mod assign;
mod benchmark;
mod pairs;
mod refine;
mod tangent;

pub use assemble::{assemble_planner_lp, Boxes, PlannerSpec, TangentSet};
pub use assign::{
    assignment_iterate, assignment_iterate_with_pairs, effective_skill, quantile_match,
    AssignmentOptions, AssignmentResult, FirmDistribution, InitialAssignment, OuterRecord,
};
pub use benchmark::benchmark_closed_form;
pub use pairs::{enumerate_irreducible, IrreduciblePairSet};
pub use refine::{
    proper_check, solve_fixed_assignment, BoxVar, FixedAssignmentResult, IterationRecord,
    ProperReport, RefineOptions, RefinementState,
};
pub use tangent::{build_tangents, build_tangents_capped, TangentFamily, TANGENT_CAP};
