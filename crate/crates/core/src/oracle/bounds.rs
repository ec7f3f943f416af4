//! Closed-form bounds on allocations and step size.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::task::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub n: usize,
    pub lambda_min: f64,
    pub c_max: f64,
    /// Recurrent lower level every share must exceed, `lambda_min / (n c_max)`.
    pub alpha_star: f64,
    /// Recurrent upper level every share must drop below, `c_max / (n lambda_min)`.
    pub beta_star: f64,
    pub safe_epsilon: f64,
    /// Filter contraction `epsilon mu(epsilon) gamma`.
    pub theorem1_kappa: f64,
}

impl BoundSet {
    /// Balance threshold used by the recurrence monitor.
    pub fn balance_level(&self) -> f64 {
        (self.beta_star + 0.05).min(1.0)
    }

    /// A single share can never exceed 1, so `beta_star >= 1` makes balance vacuous.
    pub fn balance_is_vacuous(&self) -> bool {
        self.beta_star >= 1.0
    }

    /// Length of the recurrence window, `ceil(5 / (epsilon lambda_min / c_max))` steps.
    pub fn window(&self, epsilon: f64) -> u64 {
        (5.0 / (epsilon * self.lambda_min / self.c_max)).ceil() as u64
    }

    /// Noise-free envelope `[lambda_min/c_max - v n, 1 - v n lambda_min/c_max]`
    /// of the fairness index of a task holding share `v`.
    pub fn fairness_envelope(&self, v: f64) -> (f64, f64) {
        let r = self.lambda_min / self.c_max;
        let n = self.n as f64;
        (r - v * n, 1.0 - v * n * r)
    }
}

pub fn bounds(specs: &[TaskSpec], cfg: &EngineConfig) -> Result<BoundSet> {
    if specs.is_empty() {
        return Err(Error::Config("bounds need at least one task".into()));
    }
    let n = specs.len();
    let lambda_min = specs.iter().map(|t| t.weight).fold(f64::INFINITY, f64::min);
    let c_max = specs
        .iter()
        .map(|t| crate::utility::Utility::bound_c(&t.utility))
        .fold(f64::NEG_INFINITY, f64::max);
    let nf = n as f64;
    Ok(BoundSet {
        n,
        lambda_min,
        c_max,
        alpha_star: lambda_min / (nf * c_max),
        beta_star: c_max / (nf * lambda_min),
        safe_epsilon: safe_epsilon(lambda_min, c_max, n, cfg.eta_bar),
        theorem1_kappa: cfg.kappa(),
    })
}

/// Conservative step size below which the allocation provably stays feasible.
///
/// Minimum of `lambda/(c n^2 (1+2 eta^2))` and
/// `lambda (n-1) / (c n (1 + lambda (n-1)/c) (1+2 eta^2))`. The second term is
/// zero for `n = 1`, where the allocation is the constant `1` and only the
/// first term is meaningful.
pub fn safe_epsilon(lambda_min: f64, c_max: f64, n: usize, eta_bar: f64) -> f64 {
    let nf = n as f64;
    let slack = 1.0 + 2.0 * eta_bar * eta_bar;
    let first = lambda_min / (c_max * nf * nf * slack);
    if n <= 1 {
        return first;
    }
    let r = lambda_min * (nf - 1.0) / c_max;
    let second = r / (nf * (1.0 + r) * slack);
    first.min(second)
}
