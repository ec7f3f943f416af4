//! Distance between the discrete allocation path and the full ODE.

use serde::{Deserialize, Serialize};

use super::ode::integrate_full_ode_sampled;
use crate::config::EngineConfig;
use crate::dynamics::{initial_states, Engine};
use crate::error::{Error, Result};
use crate::task::TaskSpec;

/// Largest RK4 step of the reference path. The level field is discontinuous
/// at `s = sigma`, so coarser steps resolve the sliding motion there poorly.
pub const TRACKING_MAX_DT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub epsilon: f64,
    pub t_end: f64,
    pub ode_dt: f64,
    /// `sup_k max_i |v_i(k) - v_bar_i(epsilon k)|` over `epsilon k <= t_end`.
    pub gap: f64,
    pub gap_time: f64,
}

/// Runs the engine as configured (noise included, if any) for
/// `round(t_end / epsilon)` steps and compares every step with the full ODE
/// integrated from the same initial state, at an RK4 step that divides
/// `epsilon` and does not exceed [`TRACKING_MAX_DT`].
pub fn tracking_gap(specs: &[TaskSpec], cfg: &EngineConfig, t_end: f64) -> Result<TrackingReport> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("tracking horizon must be positive, got {t_end}")));
    }
    let per_step = (cfg.epsilon / TRACKING_MAX_DT).ceil().max(1.0) as usize;
    let dt = cfg.epsilon / per_step as f64;
    let steps = (t_end / cfg.epsilon).round() as u64;
    let traj = integrate_full_ode_sampled(
        specs,
        cfg,
        &initial_states(specs, cfg),
        steps as f64 * cfg.epsilon,
        dt,
        per_step,
    )?;

    let mut engine = Engine::new(specs, cfg.clone())?;
    let mut gap = 0.0f64;
    let mut gap_time = 0.0;
    for k in 0..=steps {
        let v = engine.snapshot().allocation();
        let d = v
            .iter()
            .zip(traj.allocation_at(k as usize))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if d > gap {
            gap = d;
            gap_time = k as f64 * cfg.epsilon;
        }
        if k < steps {
            engine.step()?;
        }
    }
    Ok(TrackingReport {
        epsilon: cfg.epsilon,
        t_end,
        ode_dt: dt,
        gap,
        gap_time,
    })
}
