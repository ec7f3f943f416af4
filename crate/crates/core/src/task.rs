//! Task descriptions and per-task learning state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::UtilityModel;

/// Piecewise-constant demand over the step index.
///
/// Serialized as `[[start_step, demand], ...]`; the first zone must start at
/// step 0 and start steps must be strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u64, f64)>", into = "Vec<(u64, f64)>")]
pub struct DemandSchedule {
    zones: Vec<(u64, f64)>,
}

impl DemandSchedule {
    pub fn new(zones: Vec<(u64, f64)>) -> Result<Self> {
        match zones.first() {
            None => return Err(Error::Spec("demand schedule has no zones".into())),
            Some(&(start, _)) if start != 0 => {
                return Err(Error::Spec(format!(
                    "first demand zone must start at step 0, got {start}"
                )))
            }
            _ => {}
        }
        if zones.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Spec(
                "demand zone start steps must be strictly increasing".into(),
            ));
        }
        if let Some(&(_, d)) = zones.iter().find(|(_, d)| !d.is_finite()) {
            return Err(Error::Spec(format!("demand value {d} is not finite")));
        }
        Ok(Self { zones })
    }

    pub fn constant(demand: f64) -> Self {
        Self {
            zones: vec![(0, demand)],
        }
    }

    pub fn zones(&self) -> &[(u64, f64)] {
        &self.zones
    }

    /// Demand in effect at `step`.
    pub fn at(&self, step: u64) -> f64 {
        let idx = self.zones.partition_point(|&(start, _)| start <= step);
        self.zones[idx - 1].1
    }

    /// Smallest and largest demand the schedule ever takes.
    pub fn range(&self) -> (f64, f64) {
        self.zones
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, d)| {
                (lo.min(d), hi.max(d))
            })
    }
}

impl TryFrom<Vec<(u64, f64)>> for DemandSchedule {
    type Error = Error;

    fn try_from(zones: Vec<(u64, f64)>) -> Result<Self> {
        Self::new(zones)
    }
}

impl From<DemandSchedule> for Vec<(u64, f64)> {
    fn from(d: DemandSchedule) -> Self {
        d.zones
    }
}

/// Immutable description of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(skip)]
    pub id: usize,
    /// Importance weight `lambda_i` in `(0, 1]`.
    pub weight: f64,
    #[serde(rename = "model")]
    pub utility: UtilityModel,
    #[serde(rename = "demand_zones")]
    pub demand: DemandSchedule,
}

impl TaskSpec {
    pub fn new(id: usize, weight: f64, utility: UtilityModel, demand: DemandSchedule) -> Result<Self> {
        let spec = Self {
            id,
            weight,
            utility,
            demand,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(Error::Spec(format!(
                "task {}: weight must lie in (0, 1], got {}",
                self.id, self.weight
            )));
        }
        Ok(())
    }
}

/// Per-task learning state `(v, s, rho, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    /// Resource share.
    pub v: f64,
    /// Operation level.
    pub s: f64,
    /// Low-pass filter of the measured utility.
    pub rho: f64,
    /// Low-pass filter of the operation level.
    pub sigma: f64,
}
