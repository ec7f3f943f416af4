//! Measurement-driven fair allocation of a unit resource among tasks.
//!
//! A resource manager repeatedly shifts shares toward tasks whose weighted
//! inverse utility is under-served, while each task's operation level climbs
//! its own utility using only noisy readings. The [`oracle`] module holds the
//! reference computations the engine is checked against.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod noise;
pub mod oracle;
pub mod scenario;
pub mod task;
pub mod utility;

pub use config::EngineConfig;
pub use dynamics::{run, Engine, EngineSnapshot, RunOutput, StepRecord};
pub use error::{Error, FeasibilityBreach, Result};
pub use task::{DemandSchedule, TaskSpec, TaskState};
pub use utility::{Utility, UtilityModel};
