//! The learning recursions and the stepping engine.
//!
//! Each step measures every task once, moves the allocation along the observed
//! fairness index, and moves every operation level along a filtered estimate
//! of the utility gradient. Both updates read the same pre-step state.

use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, SIGMA_INIT_OFFSET};
use crate::error::{Error, FeasibilityBreach, Result};
use crate::noise::NoiseSource;
use crate::task::{TaskSpec, TaskState};
use crate::utility::Utility;

/// Below this `|S~|` the level has not moved and the gradient ratio is dropped.
pub const RATIO_GUARD: f64 = 1e-12;

/// `F_i = (1 - v_i) w_i - v_i sum_{j != i} w_j` with `w_j = lambda_j / u_j`.
///
/// Evaluated as `w_i - v_i * sum_j w_j`, which is the same expression; the
/// components then sum to `(1 - sum v) * sum w`, i.e. zero on the simplex up
/// to rounding.
pub fn fairness_index(weights: &[f64], utilities: &[f64], v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(weights.len(), utilities.len());
    debug_assert_eq!(weights.len(), v.len());
    let w: Vec<f64> = weights.iter().zip(utilities).map(|(l, u)| l / u).collect();
    let total: f64 = w.iter().sum();
    w.iter().zip(v).map(|(wi, vi)| wi - vi * total).collect()
}

/// Exact fairness measure from noise-free utilities.
pub fn phi(specs: &[TaskSpec], s: &[f64], v: &[f64], d: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = specs
        .iter()
        .enumerate()
        .map(|(i, t)| t.utility.eval(s[i], v[i], d[i]))
        .collect();
    fairness_index(&weights(specs), &u, v)
}

/// Fairness index computed from measured utilities.
pub fn observed_fairness(specs: &[TaskSpec], measured: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if let Some((task, &value)) = measured
        .iter()
        .enumerate()
        .find(|(_, u)| !(u.is_finite() && **u > 0.0))
    {
        return Err(Error::Measurement { task, value });
    }
    Ok(fairness_index(&weights(specs), measured, v))
}

pub fn weights(specs: &[TaskSpec]) -> Vec<f64> {
    specs.iter().map(|t| t.weight).collect()
}

/// `v_i + epsilon F_i`, rejecting any component outside `[0, 1]`.
pub fn step_resources(
    v: &[f64],
    f_obs: &[f64],
    epsilon: f64,
    step: u64,
) -> std::result::Result<Vec<f64>, FeasibilityBreach> {
    let next: Vec<f64> = v.iter().zip(f_obs).map(|(vi, fi)| vi + epsilon * fi).collect();
    match next.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(task) => Err(FeasibilityBreach {
            step,
            task,
            value: next[task],
        }),
        None => Ok(next),
    }
}

/// One update of `(s, rho, sigma)` from a single measurement.
///
/// `U~ = gamma (u~ - rho)` and `S~ = gamma (s - sigma)` are filtered changes of
/// utility and level; their ratio estimates `du/ds`. The level moves by
/// `eps mu (tanh(U~/S~) + zeta)` and is clamped to `[0, 1]`. The allocation is
/// left untouched.
pub fn step_operation_level(state: TaskState, measured: f64, dither: f64, cfg: &EngineConfig) -> TaskState {
    let step = cfg.level_step();
    let du = cfg.gamma * (measured - state.rho);
    let ds = cfg.gamma * (state.s - state.sigma);
    let drift = if ds.abs() < RATIO_GUARD {
        0.0
    } else {
        (du / ds).tanh()
    };
    TaskState {
        v: state.v,
        s: (state.s + step * drift + step * dither).clamp(0.0, 1.0),
        rho: state.rho + step * du,
        sigma: state.sigma + step * ds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessVector {
    /// Exact `Phi_i` at the snapshot state.
    pub phi: Vec<f64>,
    /// Observed `F_i` of the step that produced the snapshot.
    pub f_obs: Vec<f64>,
}

/// Engine state at step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub step: u64,
    pub states: Vec<TaskState>,
    /// Noise-free utilities at this state and the demand of step `k`.
    pub utilities: Vec<f64>,
    /// Measurements consumed by the step that produced this snapshot (the
    /// noise-free utilities at step 0).
    pub measurements: Vec<f64>,
    pub fairness: FairnessVector,
    /// `sum_i Phi_i^2`, reported only.
    pub phi_sq_sum: f64,
}

impl EngineSnapshot {
    pub fn allocation(&self) -> Vec<f64> {
        self.states.iter().map(|x| x.v).collect()
    }

    pub fn levels(&self) -> Vec<f64> {
        self.states.iter().map(|x| x.s).collect()
    }
}

/// One row of output for iteration `k`: the state the step started from, the
/// measurements taken there, and the resulting fairness indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    /// Measured utilities `u~_i(k)`.
    pub u: Vec<f64>,
    pub f_obs: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_sq_sum: f64,
}

impl StepRecord {
    pub fn n_tasks(&self) -> usize {
        self.v.len()
    }
}

fn demands_at(specs: &[TaskSpec], step: u64) -> Vec<f64> {
    specs.iter().map(|t| t.demand.at(step)).collect()
}

fn clean_utilities(specs: &[TaskSpec], states: &[TaskState], step: u64) -> Vec<f64> {
    specs
        .iter()
        .zip(states)
        .map(|(t, x)| t.utility.eval(x.s, x.v, t.demand.at(step)))
        .collect()
}

/// Starting state: given or uniform allocation, `s = s_init`, `rho` at the
/// noise-free utility and `sigma` just below `s`.
pub fn initial_states(specs: &[TaskSpec], cfg: &EngineConfig) -> Vec<TaskState> {
    let v = cfg.initial_allocation(specs.len());
    specs
        .iter()
        .zip(v)
        .map(|(t, v)| TaskState {
            v,
            s: cfg.s_init,
            rho: t.utility.eval(cfg.s_init, v, t.demand.at(0)),
            sigma: cfg.s_init - SIGMA_INIT_OFFSET,
        })
        .collect()
}

fn snapshot_at(specs: &[TaskSpec], weights: &[f64], states: Vec<TaskState>, step: u64) -> EngineSnapshot {
    let utilities = clean_utilities(specs, &states, step);
    let v: Vec<f64> = states.iter().map(|x| x.v).collect();
    let phi = fairness_index(weights, &utilities, &v);
    EngineSnapshot {
        step,
        phi_sq_sum: phi.iter().map(|p| p * p).sum(),
        measurements: utilities.clone(),
        fairness: FairnessVector {
            f_obs: phi.clone(),
            phi,
        },
        utilities,
        states,
    }
}

/// Synchronous stepping engine over a fixed task set.
///
/// Also an iterator over [`StepRecord`]s that stops at the horizon or after
/// the first error.
pub struct Engine<'a> {
    specs: &'a [TaskSpec],
    cfg: EngineConfig,
    weights: Vec<f64>,
    noise: NoiseSource,
    snap: EngineSnapshot,
    halted: bool,
}

impl<'a> Engine<'a> {
    pub fn new(specs: &'a [TaskSpec], cfg: EngineConfig) -> Result<Self> {
        for t in specs {
            t.check()?;
        }
        let cfg = cfg.checked(specs)?;
        let weights = weights(specs);
        let snap = snapshot_at(specs, &weights, initial_states(specs, &cfg), 0);
        Ok(Self {
            noise: NoiseSource::new(cfg.seed, cfg.eta_bar, cfg.zeta_bar),
            specs,
            cfg,
            weights,
            snap,
            halted: false,
        })
    }

    /// Starts from an explicit state instead of the default initialization.
    pub fn with_states(specs: &'a [TaskSpec], cfg: EngineConfig, states: Vec<TaskState>) -> Result<Self> {
        let mut engine = Self::new(specs, cfg)?;
        if states.len() != specs.len() {
            return Err(Error::Config(format!(
                "{} initial states for {} tasks",
                states.len(),
                specs.len()
            )));
        }
        engine.snap = snapshot_at(specs, &engine.weights, states, 0);
        Ok(engine)
    }

    pub fn snapshot(&self) -> &EngineSnapshot {
        &self.snap
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn specs(&self) -> &'a [TaskSpec] {
        self.specs
    }

    /// Advances one step and returns the record of the state it started from.
    pub fn step(&mut self) -> Result<StepRecord> {
        let k = self.snap.step;
        let measured: Vec<f64> = self
            .snap
            .utilities
            .iter()
            .enumerate()
            .map(|(i, u)| u + self.noise.measurement(k, i))
            .collect();
        let v = self.snap.allocation();
        let f_obs = observed_fairness(self.specs, &measured, &v)?;
        let v_next = step_resources(&v, &f_obs, self.cfg.epsilon, k)?;

        let states: Vec<TaskState> = self
            .snap
            .states
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut next = if self.cfg.freeze_levels {
                    x
                } else {
                    step_operation_level(x, measured[i], self.noise.dither(k, i), &self.cfg)
                };
                next.v = v_next[i];
                next
            })
            .collect();

        let record = StepRecord {
            step: k,
            s: self.snap.levels(),
            v,
            u: measured.clone(),
            f_obs: f_obs.clone(),
            phi: self.snap.fairness.phi.clone(),
            phi_sq_sum: self.snap.phi_sq_sum,
        };

        let mut next = snapshot_at(self.specs, &self.weights, states, k + 1);
        next.measurements = measured;
        next.fairness.f_obs = f_obs;
        self.snap = next;
        Ok(record)
    }

    /// Demands in effect at the current step.
    pub fn demands(&self) -> Vec<f64> {
        demands_at(self.specs, self.snap.step)
    }
}

impl Iterator for Engine<'_> {
    type Item = Result<StepRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.halted || self.snap.step >= self.cfg.horizon {
            return None;
        }
        let out = self.step();
        self.halted = out.is_err();
        Some(out)
    }
}

/// Records of a finished (or aborted) run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub last: EngineSnapshot,
    pub breach: Option<FeasibilityBreach>,
}

/// Runs `cfg.horizon` steps, keeping every `stride`-th record.
///
/// A feasibility breach ends the run early and is reported alongside the
/// records gathered so far; any other error is returned.
pub fn run(specs: &[TaskSpec], cfg: EngineConfig, stride: u64) -> Result<RunOutput> {
    let stride = stride.max(1);
    let mut engine = Engine::new(specs, cfg)?;
    let mut records = Vec::new();
    let mut breach = None;
    for rec in engine.by_ref() {
        match rec {
            Ok(r) if r.step % stride == 0 => records.push(r),
            Ok(_) => {}
            Err(Error::Feasibility(b)) => breach = Some(b),
            Err(e) => return Err(e),
        }
    }
    Ok(RunOutput {
        records,
        last: engine.snapshot().clone(),
        breach,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::DemandSchedule;
    use crate::utility::{argmax_s, HomeEnergyModel, UtilityModel, ARGMAX_TOL};
    use proptest::prelude::*;

    fn home_spec(id: usize, weight: f64, d: f64) -> TaskSpec {
        TaskSpec::new(
            id,
            weight,
            UtilityModel::HomeEnergy(HomeEnergyModel::new(2.0, 1.0, 2.0, 1.0, 0.5))
                .normalized((0.4, 0.8), 33, 2.0),
            DemandSchedule::constant(d),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_point_has_zero_fairness() {
        let f = fairness_index(&[1.0, 1.0], &[2.0, 2.0], &[0.5, 0.5]);
        assert_eq!(f, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_fairness() {
        // Phi_1 = 0.75 * 1 - 0.25 * 0.5, Phi_2 = 0.25 * 0.5 - 0.75 * 1
        let f = fairness_index(&[1.0, 1.0], &[1.0, 2.0], &[0.25, 0.75]);
        assert!((f[0] - 0.625).abs() < 1e-15);
        assert!((f[1] + 0.625).abs() < 1e-15);
        assert!((f[0] + f[1]).abs() < 1e-15);
    }

    #[test]
    fn starved_task_has_positive_deficiency() {
        let f = fairness_index(&[0.7, 1.0, 0.4], &[1.5, 1.2, 1.9], &[0.0, 0.6, 0.4]);
        assert_eq!(f[0], 0.7 / 1.5);
    }

    #[test]
    fn observed_fairness_matches_exact_without_noise() {
        let specs = vec![home_spec(0, 1.0, 0.4), home_spec(1, 0.5, 0.6)];
        let (s, v, d) = ([0.3, 0.7], [0.4, 0.6], [0.4, 0.6]);
        let exact = phi(&specs, &s, &v, &d);
        let u: Vec<f64> = (0..2).map(|i| specs[i].utility.eval(s[i], v[i], d[i])).collect();
        let obs = observed_fairness(&specs, &u, &v).unwrap();
        assert_eq!(
            exact.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            obs.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn observed_fairness_rejects_nonpositive_measurements() {
        let specs = vec![home_spec(0, 1.0, 0.4), home_spec(1, 1.0, 0.4)];
        assert!(matches!(
            observed_fairness(&specs, &[1.0, 0.0], &[0.5, 0.5]),
            Err(Error::Measurement { task: 1, .. })
        ));
        assert!(observed_fairness(&specs, &[-1.0, 1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn resource_step_hand_trace() {
        let v = step_resources(&[0.25, 0.75], &[0.625, -0.625], 0.1, 0).unwrap();
        assert!((v[0] - 0.3125).abs() < 1e-15);
        assert!((v[1] - 0.6875).abs() < 1e-15);
        assert!((v[0] + v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_drift_is_a_fixed_point() {
        let v = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(step_resources(&v, &[0.0; 4], 0.5, 0).unwrap(), v.to_vec());
    }

    #[test]
    fn resource_step_reports_breach() {
        let err = step_resources(&[0.05, 0.95], &[-1.0, 1.0], 0.1, 17).unwrap_err();
        assert_eq!(err.step, 17);
        assert_eq!(err.task, 0);
        assert!(err.value < 0.0);
    }

    #[test]
    fn identical_tasks_at_uniform_stay_put() {
        let specs: Vec<TaskSpec> = (0..4).map(|i| home_spec(i, 1.0, 0.4)).collect();
        let v = [0.25; 4];
        let f = phi(&specs, &[0.5; 4], &v, &[0.4; 4]);
        assert!(f.iter().all(|x| *x == 0.0));
        assert_eq!(step_resources(&v, &f, 5e-4, 0).unwrap(), v.to_vec());
    }

    #[test]
    fn equilibrated_filters_only_dither() {
        let cfg = EngineConfig::default();
        let x = TaskState {
            v: 0.3,
            s: 0.4,
            rho: 1.7,
            sigma: 0.4,
        };
        let next = step_operation_level(x, 1.7, 0.5, &cfg);
        assert_eq!(next.s, (0.4 + cfg.level_step() * 0.5).clamp(0.0, 1.0));
        assert_eq!(next.rho, 1.7);
        assert_eq!(next.sigma, 0.4);
        assert_eq!(next.v, 0.3);
    }

    #[test]
    fn level_step_hand_trace() {
        let cfg = EngineConfig::default();
        let x = TaskState {
            v: 0.25,
            s: 0.5,
            rho: 1.0,
            sigma: 0.4,
        };
        let next = step_operation_level(x, 1.5, 0.0, &cfg);
        // U~ = 50, S~ = 10, tanh(5) = 0.999909; eps mu = 7.311753e-4
        assert!((next.s - 0.500731109).abs() < 1e-9, "s' = {}", next.s);
        assert!((next.rho - (1.0 + 7.311752867784813e-4 * 50.0)).abs() < 1e-12);
        assert!((next.sigma - (0.4 + 7.311752867784813e-4 * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn level_is_clamped_at_boundary() {
        let cfg = EngineConfig::default();
        let x = TaskState {
            v: 0.5,
            s: 1.0,
            rho: 1.0,
            sigma: 0.9,
        };
        assert_eq!(step_operation_level(x, 2.0, 0.001, &cfg).s, 1.0);
        let y = TaskState { s: 0.0, sigma: 0.1, ..x };
        assert_eq!(step_operation_level(y, 2.0, -0.001, &cfg).s, 0.0);
    }

    #[test]
    fn frozen_inputs_contract_filters_geometrically() {
        let cfg = EngineConfig::default();
        let kappa = cfg.kappa();
        let (u, s) = (1.6, 0.3);
        let mut x = TaskState {
            v: 0.5,
            s,
            rho: 1.0,
            sigma: 0.7,
        };
        for k in 1..=200 {
            let next = step_operation_level(x, u, 0.0, &cfg);
            x = TaskState { s, ..next };
            let factor = (1.0 - kappa).powi(k);
            assert!((u - x.rho - (u - 1.0) * factor).abs() < 1e-12);
            assert!((s - x.sigma - (s - 0.7) * factor).abs() < 1e-12);
        }
    }

    /// Two tasks, no noise, one step from v = (0.25, 0.75), traced by hand
    /// with the raw formulas rather than the engine.
    #[test]
    fn engine_first_step_matches_hand_trace() {
        let m1 = HomeEnergyModel::new(2.0, 1.0, 2.0, 1.0, 0.5);
        let m2 = HomeEnergyModel::new(1.0, 0.5, 1.0, 1.5, 0.8);
        let specs = vec![
            TaskSpec::new(0, 1.0, UtilityModel::HomeEnergy(m1), DemandSchedule::constant(0.4)).unwrap(),
            TaskSpec::new(1, 0.6, UtilityModel::HomeEnergy(m2), DemandSchedule::constant(0.7)).unwrap(),
        ];
        let cfg = EngineConfig {
            eta_bar: 0.0,
            zeta_bar: 0.0,
            v_init: Some(vec![0.25, 0.75]),
            s_init: 0.5,
            ..Default::default()
        };
        let mut engine = Engine::new(&specs, cfg.clone()).unwrap();
        let rec = engine.step().unwrap();

        // u1 = 2 (1 - 0.01) + (0.25 - 0.25) + 2 = 3.98
        // u2 = 1 (1.5 - 0.04) + 0.5 (0.75 - 0.4) + 1 = 2.635
        let (u1, u2) = (3.98, 2.635);
        assert!((rec.u[0] - u1).abs() < 1e-12 && (rec.u[1] - u2).abs() < 1e-12);
        let (w1, w2) = (1.0 / u1, 0.6 / u2);
        let f1 = 0.75 * w1 - 0.25 * w2;
        let f2 = 0.25 * w2 - 0.75 * w1;
        assert!((rec.f_obs[0] - f1).abs() < 1e-14 && (rec.f_obs[1] - f2).abs() < 1e-14);

        let snap = engine.snapshot();
        assert!((snap.states[0].v - (0.25 + 5e-4 * f1)).abs() < 1e-15);
        assert!((snap.states[1].v - (0.75 + 5e-4 * f2)).abs() < 1e-15);

        // rho(0) = u, so U~ = 0 and tanh(0) = 0: levels stay, sigma closes in.
        let step = cfg.level_step();
        for x in &snap.states {
            assert_eq!(x.s, 0.5);
            assert!((x.sigma - (0.499 + step * 100.0 * 0.001)).abs() < 1e-15);
        }
        assert_eq!(snap.states[0].rho, u1);
        assert_eq!(snap.step, 1);
    }

    #[test]
    fn horizon_zero_yields_nothing() {
        let specs = vec![home_spec(0, 1.0, 0.4)];
        let cfg = EngineConfig {
            horizon: 0,
            ..Default::default()
        };
        let out = run(&specs, cfg, 1).unwrap();
        assert!(out.records.is_empty());
        assert!(out.breach.is_none());
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let specs = vec![home_spec(0, 1.0, 0.4), home_spec(1, 0.4, 0.7), home_spec(2, 0.8, 0.5)];
        let cfg = EngineConfig {
            horizon: 2_000,
            seed: 9,
            ..Default::default()
        };
        let a = run(&specs, cfg.clone(), 1).unwrap();
        let b = run(&specs, cfg, 1).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.last, b.last);
    }

    #[test]
    fn fixed_point_start_stays_fixed() {
        let specs: Vec<TaskSpec> = (0..4).map(|i| home_spec(i, 1.0, 0.4)).collect();
        let s_star = argmax_s(&specs[0].utility, 0.25, 0.4, ARGMAX_TOL);
        let cfg = EngineConfig {
            eta_bar: 0.0,
            zeta_bar: 0.0,
            ..Default::default()
        };
        let states: Vec<TaskState> = specs
            .iter()
            .map(|t| TaskState {
                v: 0.25,
                s: s_star,
                rho: t.utility.eval(s_star, 0.25, 0.4),
                sigma: s_star,
            })
            .collect();
        let mut engine = Engine::with_states(&specs, cfg, states).unwrap();
        let rec = engine.step().unwrap();
        assert!(rec.f_obs.iter().all(|f| *f == 0.0));
        let snap = engine.snapshot();
        for x in &snap.states {
            assert_eq!(x.v, 0.25);
            assert_eq!(x.s, s_star);
        }
    }

    #[test]
    fn oversized_step_breaches() {
        // u < 2 and lambda = 1, so sum w > 6 and eps * sum w > 1: the heavy
        // task's share overshoots below zero on the first step.
        let specs: Vec<TaskSpec> = (0..12).map(|i| home_spec(i, 1.0, 0.4)).collect();
        let mut v = vec![0.01; 12];
        v[0] = 0.89;
        let cfg = EngineConfig {
            epsilon: 0.5,
            gamma: 1.0,
            v_init: Some(v),
            horizon: 100,
            ..Default::default()
        };
        let out = run(&specs, cfg, 1).unwrap();
        let breach = out.breach.expect("breach");
        assert_eq!((breach.step, breach.task), (0, 0));
        assert!(out.records.is_empty());
    }

    #[test]
    fn stride_thins_records() {
        let specs = vec![home_spec(0, 1.0, 0.4), home_spec(1, 0.5, 0.6)];
        let cfg = EngineConfig {
            horizon: 1_000,
            ..Default::default()
        };
        let out = run(&specs, cfg, 100).unwrap();
        assert_eq!(out.records.len(), 10);
        assert!(out.records.iter().all(|r| r.step % 100 == 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fairness_sums_to_zero_on_simplex(raw in proptest::collection::vec((0.01f64..1.0, 0.2f64..1.0, 1.0f64..3.0), 1..30)) {
            let total: f64 = raw.iter().map(|r| r.0).sum();
            let v: Vec<f64> = raw.iter().map(|r| r.0 / total).collect();
            let l: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let u: Vec<f64> = raw.iter().map(|r| r.2).collect();
            let f = fairness_index(&l, &u, &v);
            prop_assert!(f.iter().sum::<f64>().abs() <= 1e-12);
        }

        #[test]
        fn resource_steps_preserve_sum(raw in proptest::collection::vec((0.05f64..1.0, 0.2f64..1.0, 1.0f64..2.0), 2..12),
                                       eps in 1e-5f64..1e-3) {
            let total: f64 = raw.iter().map(|r| r.0).sum();
            let mut v: Vec<f64> = raw.iter().map(|r| r.0 / total).collect();
            let l: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let u: Vec<f64> = raw.iter().map(|r| r.2).collect();
            for k in 0..500 {
                let f = fairness_index(&l, &u, &v);
                v = step_resources(&v, &f, eps, k).unwrap();
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn level_updates_stay_in_box(s in 0.0f64..1.0, sigma in -1.0f64..2.0, rho in 0.0f64..3.0,
                                     u in 0.5f64..3.0, zeta in -0.01f64..0.01) {
            let cfg = EngineConfig::default();
            let x = TaskState { v: 0.5, s, rho, sigma };
            let next = step_operation_level(x, u, zeta, &cfg);
            prop_assert!((0.0..=1.0).contains(&next.s));
            prop_assert!(next.rho.is_finite() && next.sigma.is_finite());
        }
    }
}
