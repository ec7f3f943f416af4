//! Engine configuration and its validation.
//!
//! The two step sizes are tied together: resources move with `epsilon`, while
//! operation levels and their filters move with `epsilon * mu(epsilon)` where
//! `mu(epsilon) = epsilon^(-p)`. Any `0 < p < 1` keeps the level recursion on
//! the faster timescale as `epsilon -> 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::bounds::safe_epsilon;
use crate::task::TaskSpec;
use crate::utility::Utility;

/// Offset between the initial level and its filter, so the first gradient
/// estimate is not a `0/0`.
pub const SIGMA_INIT_OFFSET: f64 = 1e-3;

/// Tolerance for an explicit initial allocation to count as a simplex point.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub epsilon: f64,
    pub mu_exponent: f64,
    pub gamma: f64,
    pub eta_bar: f64,
    pub zeta_bar: f64,
    pub horizon: u64,
    pub seed: u64,
    pub s_init: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_init: Option<Vec<f64>>,
    /// Hold operation levels (and their filters) fixed; only resources move.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub freeze_levels: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            epsilon: 5e-4,
            mu_exponent: 1.0 / 20.0,
            gamma: 100.0,
            eta_bar: 1e-3,
            zeta_bar: 1e-3,
            horizon: 120_000,
            seed: 0,
            s_init: 0.5,
            v_init: None,
            freeze_levels: false,
        }
    }
}

impl EngineConfig {
    /// `mu(epsilon) = epsilon^(-p)`.
    pub fn mu(&self) -> f64 {
        self.epsilon.powf(-self.mu_exponent)
    }

    /// Effective step of the level recursion, `epsilon * mu(epsilon)`.
    pub fn level_step(&self) -> f64 {
        self.epsilon * self.mu()
    }

    /// Per-step contraction of the low-pass filters, `epsilon * mu(epsilon) * gamma`.
    pub fn kappa(&self) -> f64 {
        self.level_step() * self.gamma
    }

    /// Initial allocation for `n` tasks: the explicit one if given, else uniform.
    pub fn initial_allocation(&self, n: usize) -> Vec<f64> {
        match &self.v_init {
            Some(v) => v.clone(),
            None => vec![1.0 / n as f64; n],
        }
    }

    /// Rejects any configuration with a hard violation.
    pub fn checked(self, specs: &[TaskSpec]) -> Result<Self> {
        let report = validate_config(&self, specs);
        if let Some(first) = report.errors().next() {
            return Err(Error::Config(format!("{}: {}", first.check, first.message)));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub check: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, severity: Severity, check: &str, message: String) {
        self.violations.push(Violation {
            severity,
            check: check.to_string(),
            message,
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn has(&self, check: &str) -> bool {
        self.violations.iter().any(|v| v.check == check)
    }
}

/// Checks a configuration against the task set it will drive.
///
/// Hard errors: non-positive step sizes, `p` outside `(0, 1)`, the filter
/// contraction `kappa = epsilon * mu * gamma >= 1`, `eta_bar >= 1`, and a
/// malformed initial state. A step size above the conservative feasibility
/// bound is only a warning, since that bound is far from tight.
pub fn validate_config(cfg: &EngineConfig, specs: &[TaskSpec]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = specs.len();
    if n == 0 {
        report.push(Severity::Error, "task_count", "at least one task is required".into());
    }
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        report.push(
            Severity::Error,
            "epsilon",
            format!("epsilon must be a positive finite number, got {}", cfg.epsilon),
        );
    }
    if !(cfg.mu_exponent > 0.0 && cfg.mu_exponent < 1.0) {
        report.push(
            Severity::Error,
            "mu_exponent",
            format!("mu_exponent must lie in (0, 1), got {}", cfg.mu_exponent),
        );
    }
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        report.push(
            Severity::Error,
            "gamma",
            format!("gamma must be a positive finite number, got {}", cfg.gamma),
        );
    }
    let kappa = cfg.kappa();
    if !(kappa > 0.0 && kappa < 1.0) {
        report.push(
            Severity::Error,
            "step_condition",
            format!(
                "epsilon*mu(epsilon) = {:.4e} must be below 1/gamma = {:.4e} (kappa = {:.4e})",
                cfg.level_step(),
                1.0 / cfg.gamma,
                kappa
            ),
        );
    }
    for (name, bound) in [("eta_bar", cfg.eta_bar), ("zeta_bar", cfg.zeta_bar)] {
        if !(bound.is_finite() && bound >= 0.0) {
            report.push(
                Severity::Error,
                name,
                format!("{name} must be a non-negative finite number, got {bound}"),
            );
        }
    }
    if cfg.eta_bar >= 1.0 {
        report.push(
            Severity::Error,
            "eta_bar",
            format!(
                "measurement noise bound {} >= 1 can drive measurements to zero",
                cfg.eta_bar
            ),
        );
    }
    if !(0.0..=1.0).contains(&cfg.s_init) {
        report.push(
            Severity::Error,
            "s_init",
            format!("s_init must lie in [0, 1], got {}", cfg.s_init),
        );
    }
    if let Some(v) = &cfg.v_init {
        let sum: f64 = v.iter().sum();
        if v.len() != n {
            report.push(
                Severity::Error,
                "v_init",
                format!("v_init has {} entries for {} tasks", v.len(), n),
            );
        } else if v.iter().any(|x| !(0.0..=1.0).contains(x)) || (sum - 1.0).abs() > SIMPLEX_TOL {
            report.push(
                Severity::Error,
                "v_init",
                format!("v_init is not on the unit simplex (sum = {sum})"),
            );
        }
    }
    if n > 0 && cfg.epsilon > 0.0 {
        let lambda_min = specs.iter().map(|t| t.weight).fold(f64::INFINITY, f64::min);
        let c_max = specs
            .iter()
            .map(|t| t.utility.bound_c())
            .fold(f64::NEG_INFINITY, f64::max);
        let safe = safe_epsilon(lambda_min, c_max, n, cfg.eta_bar);
        if cfg.epsilon > safe {
            report.push(
                Severity::Warning,
                "feasibility_bound",
                format!(
                    "epsilon = {:.4e} exceeds the conservative feasibility bound {:.4e}",
                    cfg.epsilon, safe
                ),
            );
        }
    }
    report
}
