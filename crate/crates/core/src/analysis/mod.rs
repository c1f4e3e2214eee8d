//! Post-solution diagnostics: bunching detection and classification, tax
//! wedges, optimality-condition residuals, stochastic-dominance checks and
//! approximation-gap verification.

mod bunching;
mod el;
mod gap;
mod ssd;
mod wedge;

pub use bunching::{classify_bunching, detect_bunching, BunchClass, BunchLabel, BunchingReport};
pub use el::{bunched_via_el, el_residual, ConcordanceReport, ElResidual, ThresholdPolicy};
pub use gap::{approximation_gap_check, refinement_gap_report, GapCheck};
pub use ssd::{
    abc_check_1d_from_terms, general_abc_check_1d, ssd_check_1d, AbcVerdict, SsdVerdict,
};
pub use wedge::{wedges, WedgeField};
