//! Organizational metrics, case statistics and decision mining.

mod cases;
mod decisions;
mod sna;

pub use cases::{case_statistics, CaseSummary};
pub use decisions::{decision_mining, Comparator, DecisionConfig, DecisionReport, Guard, GuardValue, Predicate};
pub use sna::{handover_of_work, similar_activities, working_together, ResourceMatrix, SnaMetric};
