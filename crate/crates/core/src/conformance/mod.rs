//! Token-based replay fitness and escaping-edges precision.

mod precision;
mod replay;

pub use precision::{etc_precision, PrecisionResult};
pub use replay::{replay_fitness, replay_trace, FitnessResult, TokenCounts, TraceFitness};
