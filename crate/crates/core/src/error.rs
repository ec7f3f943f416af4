use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The allocation left `[0, 1]` after a resource update.
///
/// This only happens when the step size is too large for the task set, so the
/// run is aborted instead of projecting the allocation back.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("feasibility breach at step {step}: task {task} allocation {value:.6e} left [0, 1]")]
pub struct FeasibilityBreach {
    pub step: u64,
    pub task: usize,
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid task specification: {0}")]
    Spec(String),

    #[error("invalid measurement for task {task}: {value}")]
    Measurement { task: usize, value: f64 },

    #[error(transparent)]
    Feasibility(#[from] FeasibilityBreach),

    #[error("non-finite state at t = {time}: {what}")]
    NonFinite { time: f64, what: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
