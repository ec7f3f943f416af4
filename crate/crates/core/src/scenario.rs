//! Experiment scenarios: task sets with demand time-zones, the built-in
//! studies, per-zone statistics and property verdicts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::dynamics::{Engine, EngineSnapshot, StepRecord};
use crate::error::{Error, FeasibilityBreach, Result};
use crate::oracle::bounds::{bounds, BoundSet};
use crate::task::{DemandSchedule, TaskSpec};
use crate::utility::{
    argmax_s, validate_assumptions, CpuBandwidthModel, HomeEnergyModel, UtilityModel, ARGMAX_TOL,
    DEFAULT_GRID_N,
};

/// Upper end of the interval built-in models are normalized into.
pub const C_TARGET: f64 = 2.0;
/// Fraction of each zone used for tail statistics.
pub const TAIL_FRACTION: f64 = 0.25;
/// Zones with fewer records are not summarized.
pub const MIN_ZONE_RECORDS: usize = 40;
/// Band an allocation must stay in to count as adapted.
pub const ADAPTATION_BAND: f64 = 0.02;
/// Leading fraction of the horizon excluded from recurrence windows.
pub const BURN_IN_FRACTION: f64 = 0.1;
/// Trailing fraction of the horizon scored for level optimality.
pub const OPTIMALITY_FRACTION: f64 = 0.2;
/// Distance to the maximizer that counts as optimal.
pub const OPTIMALITY_BAND: f64 = 0.05;
/// Required fraction of optimal steps per task.
pub const OPTIMALITY_SHARE: f64 = 0.9;
/// Tolerance on `|sum v - 1|`.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Tolerance on `|sum F|`.
pub const ZERO_SUM_TOL: f64 = 1e-12;
/// Energy slope of the identical-task study.
pub const FIG5_ENERGY_SLOPE: f64 = 1.0;
/// Attempts per task before random generation gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub engine: EngineConfig,
}

impl Scenario {
    /// Parses a scenario, naming the JSON path of the first offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut scenario: Scenario = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        scenario.assign_ids();
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn assign_ids(&mut self) {
        for (i, t) in self.tasks.iter_mut().enumerate() {
            t.id = i;
        }
    }

    /// Time-zones of the run: one per distinct demand switch across tasks,
    /// cut at the horizon.
    pub fn zones(&self) -> Vec<Zone> {
        let horizon = self.engine.horizon;
        let mut starts: Vec<u64> = self
            .tasks
            .iter()
            .flat_map(|t| t.demand.zones().iter().map(|z| z.0))
            .filter(|&k| k < horizon)
            .collect();
        starts.push(0);
        starts.sort_unstable();
        starts.dedup();
        starts
            .iter()
            .enumerate()
            .map(|(index, &start)| Zone {
                index,
                start,
                end: starts.get(index + 1).copied().unwrap_or(horizon),
            })
            .collect()
    }

    pub fn demands_at(&self, step: u64) -> Vec<f64> {
        self.tasks.iter().map(|t| t.demand.at(step)).collect()
    }
}

/// Steps `[start, end)` during which no task's demand changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub index: usize,
    pub start: u64,
    pub end: u64,
}

/// Three zones of `horizon / 3` steps each: `d1` in the first and last, and
/// `d2` in the middle.
fn three_zone(horizon: u64, d1: f64, d2: f64) -> DemandSchedule {
    let len = (horizon / 3).max(1);
    if d1 == d2 {
        return DemandSchedule::constant(d1);
    }
    DemandSchedule::new(vec![(0, d1), (len, d2), (2 * len, d1)]).expect("increasing zone starts")
}

/// Four identical home-energy tasks, `a = 2`, `b = 1`, `c = 2`, `kappa = 1`,
/// `h = 1`, all weights 1 and demand 0.4; tasks 0 and 1 double their demand
/// in the middle zone. All four share one normalization over the full demand
/// range, so they stay identical.
///
/// The energy slope `h` sets how much the demand change moves the fair
/// allocation: the middle-zone shift is about 0.012 at `h = 1` and 0.007 at
/// `h = 0.5`.
pub fn build_identical_four(cfg: EngineConfig) -> Scenario {
    let (d1, d2) = (0.4, 0.8);
    let model = UtilityModel::HomeEnergy(HomeEnergyModel::new(2.0, 1.0, 2.0, 1.0, FIG5_ENERGY_SLOPE)).normalized(
        (d1, d2),
        DEFAULT_GRID_N,
        C_TARGET,
    );
    let tasks = (0..4)
        .map(|i| {
            let demand = three_zone(cfg.horizon, d1, if i < 2 { d2 } else { d1 });
            TaskSpec::new(i, 1.0, model.clone(), demand).expect("unit weight")
        })
        .collect();
    Scenario {
        name: "paper-fig5".into(),
        tasks,
        engine: cfg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMix {
    HomeEnergy,
    CpuBandwidth,
    /// Alternates home-energy and CPU-bandwidth tasks.
    Mixed,
}

fn random_home<R: Rng>(rng: &mut R) -> UtilityModel {
    UtilityModel::HomeEnergy(HomeEnergyModel::new(
        rng.random_range(1.0..3.0),
        rng.random_range(0.5..1.5),
        rng.random_range(1.0..3.0),
        rng.random_range(0.5..1.5),
        rng.random_range(0.2..0.8),
    ))
}

fn random_cpu<R: Rng>(rng: &mut R) -> UtilityModel {
    UtilityModel::CpuBandwidth(CpuBandwidthModel {
        v_floor: 0.01,
        ..CpuBandwidthModel::new(
            rng.random_range(0.5..2.0),
            rng.random_range(1.0..3.0),
            rng.random_range(0.5..1.5),
            rng.random_range(0.5..1.5),
        )
    })
}

/// `n` random tasks: weights in `[0.2, 1]`, base demand in `[0.2, 0.4]` so
/// that every zone's demand stays within `[0.2, 0.8]`. The first `n / 2`
/// tasks double their demand in the middle zone. Each model is normalized
/// over its own demand range and must pass the assumption checks.
pub fn build_random(n: usize, seed: u64, mix: ModelMix, cfg: EngineConfig) -> Result<Scenario> {
    if n == 0 {
        return Err(Error::Config("random scenario needs at least one task".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let weight = rng.random_range(0.2..=1.0);
        let d1: f64 = rng.random_range(0.2..=0.4);
        let d2 = if i < n / 2 { 2.0 * d1 } else { d1 };
        let range = (d1.min(d2), d1.max(d2));
        let cpu = match mix {
            ModelMix::HomeEnergy => false,
            ModelMix::CpuBandwidth => true,
            ModelMix::Mixed => i % 2 == 1,
        };
        let model = (0..MAX_GENERATION_ATTEMPTS)
            .map(|_| {
                let raw = if cpu { random_cpu(&mut rng) } else { random_home(&mut rng) };
                raw.normalized(range, DEFAULT_GRID_N, C_TARGET)
            })
            .find(|m| validate_assumptions(m, range, DEFAULT_GRID_N).passed())
            .ok_or_else(|| {
                Error::Spec(format!(
                    "task {i}: no valid model after {MAX_GENERATION_ATTEMPTS} attempts"
                ))
            })?;
        tasks.push(TaskSpec::new(i, weight, model, three_zone(cfg.horizon, d1, d2))?);
    }
    Ok(Scenario {
        name: format!("random-{n}-{seed}"),
        tasks,
        engine: cfg,
    })
}

/// The 30-task random study.
pub fn build_random_thirty(cfg: EngineConfig) -> Result<Scenario> {
    let seed = cfg.seed;
    let mut s = build_random(30, seed, ModelMix::HomeEnergy, cfg)?;
    s.name = "paper-fig6".into();
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stdev: f64,
}

impl Stat {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let n = xs.clone().count() as f64;
        let mean = xs.clone().sum::<f64>() / n;
        let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            stdev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneStatus {
    Complete,
    /// The run stopped before the zone ended.
    Incomplete,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneTail {
    pub records: usize,
    pub v: Vec<Stat>,
    pub s: Vec<Stat>,
    pub f_obs: Vec<Stat>,
    pub abs_f_mean: Vec<f64>,
    pub phi_sq_sum: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSummary {
    pub zone: Zone,
    pub status: ZoneStatus,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<ZoneTail>,
    /// Steps from the zone start until every share stays within the band
    /// around its tail mean; `None` if that never happens inside the zone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adaptation_steps: Option<u64>,
}

/// Per-zone tail statistics from (possibly thinned) records. `reached` is the
/// first step the run did not complete.
pub fn summarize(records: &[StepRecord], zones: &[Zone], reached: u64) -> Vec<ZoneSummary> {
    zones
        .iter()
        .map(|&zone| {
            let inside: Vec<&StepRecord> = records
                .iter()
                .filter(|r| r.step >= zone.start && r.step < zone.end)
                .collect();
            let status = if reached < zone.end {
                ZoneStatus::Incomplete
            } else if inside.len() < MIN_ZONE_RECORDS {
                ZoneStatus::InsufficientData
            } else {
                ZoneStatus::Complete
            };
            if status != ZoneStatus::Complete {
                return ZoneSummary {
                    zone,
                    status,
                    records: inside.len(),
                    tail: None,
                    adaptation_steps: None,
                };
            }
            let cut = zone.end - ((zone.end - zone.start) as f64 * TAIL_FRACTION).round() as u64;
            let tail: Vec<&StepRecord> = inside.iter().copied().filter(|r| r.step >= cut).collect();
            let n = inside[0].n_tasks();
            let per_task = |f: &dyn Fn(&StepRecord) -> &Vec<f64>| -> Vec<Stat> {
                (0..n).map(|i| Stat::of(tail.iter().map(|r| f(r)[i]))).collect()
            };
            let v = per_task(&|r| &r.v);
            let adaptation_steps = inside
                .iter()
                .rposition(|r| r.v.iter().zip(&v).any(|(x, st)| (x - st.mean).abs() > ADAPTATION_BAND))
                .map_or(Some(0), |last_out| inside.get(last_out + 1).map(|r| r.step - zone.start));
            ZoneSummary {
                zone,
                status,
                records: inside.len(),
                tail: Some(ZoneTail {
                    records: tail.len(),
                    s: per_task(&|r| &r.s),
                    f_obs: per_task(&|r| &r.f_obs),
                    abs_f_mean: (0..n)
                        .map(|i| tail.iter().map(|r| r.f_obs[i].abs()).sum::<f64>() / tail.len() as f64)
                        .collect(),
                    phi_sq_sum: Stat::of(tail.iter().map(|r| r.phi_sq_sum)),
                    v,
                }),
                adaptation_steps,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// Nothing to check; counts as a pass.
    Vacuous,
}

impl VerdictStatus {
    pub fn ok(self) -> bool {
        self != VerdictStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub status: VerdictStatus,
    /// Observed statistic.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Verdict {
    pub fn new(property: &str, passed: bool, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            property: property.into(),
            status: if passed { VerdictStatus::Pass } else { VerdictStatus::Fail },
            value,
            threshold,
            detail,
        }
    }
}

/// Longest stretch of consecutive steps without an event, from `from` on.
#[derive(Debug, Clone)]
struct GapTracker {
    last_event: i64,
    longest: u64,
}

impl GapTracker {
    fn new(from: u64) -> Self {
        Self {
            last_event: from as i64 - 1,
            longest: 0,
        }
    }

    fn observe(&mut self, step: u64, event: bool) {
        if event {
            self.close(step);
            self.last_event = step as i64;
        }
    }

    fn close(&mut self, end: u64) {
        let gap = (end as i64 - self.last_event - 1).max(0) as u64;
        self.longest = self.longest.max(gap);
    }
}

/// Streaming checks over every step of a run.
struct Monitors<'a> {
    specs: &'a [TaskSpec],
    bounds: BoundSet,
    window: u64,
    burn_in: u64,
    opt_from: u64,
    slack: f64,
    tol_fairness: f64,
    max_sum_err: f64,
    min_v: f64,
    max_v: f64,
    max_zero_sum: f64,
    max_envelope_excess: f64,
    envelope_witness: Option<(u64, usize)>,
    starvation: Vec<GapTracker>,
    balance: Vec<GapTracker>,
    min_phi_sq: f64,
    min_phi_sq_step: u64,
    opt_hits: Vec<u64>,
    opt_total: u64,
}

impl<'a> Monitors<'a> {
    fn new(specs: &'a [TaskSpec], cfg: &EngineConfig, bounds: BoundSet) -> Self {
        let n = specs.len();
        let burn_in = (cfg.horizon as f64 * BURN_IN_FRACTION).ceil() as u64;
        Self {
            specs,
            window: bounds.window(cfg.epsilon),
            burn_in,
            opt_from: cfg.horizon - (cfg.horizon as f64 * OPTIMALITY_FRACTION).round() as u64,
            slack: 2.0 * cfg.eta_bar * cfg.eta_bar + 1e-12,
            tol_fairness: 10.0 * (cfg.epsilon + cfg.eta_bar * cfg.eta_bar),
            bounds,
            max_sum_err: 0.0,
            min_v: f64::INFINITY,
            max_v: f64::NEG_INFINITY,
            max_zero_sum: 0.0,
            max_envelope_excess: f64::NEG_INFINITY,
            envelope_witness: None,
            starvation: vec![GapTracker::new(burn_in); n],
            balance: vec![GapTracker::new(burn_in); n],
            min_phi_sq: f64::INFINITY,
            min_phi_sq_step: 0,
            opt_hits: vec![0; n],
            opt_total: 0,
        }
    }

    fn observe_allocation(&mut self, v: &[f64]) {
        let sum: f64 = v.iter().sum();
        self.max_sum_err = self.max_sum_err.max((sum - 1.0).abs());
        for &x in v {
            self.min_v = self.min_v.min(x);
            self.max_v = self.max_v.max(x);
        }
    }

    fn observe_phi(&mut self, step: u64, phi_sq: f64) {
        if phi_sq < self.min_phi_sq {
            self.min_phi_sq = phi_sq;
            self.min_phi_sq_step = step;
        }
    }

    fn observe(&mut self, r: &StepRecord) {
        let k = r.step;
        self.observe_allocation(&r.v);
        self.observe_phi(k, r.phi_sq_sum);
        self.max_zero_sum = self.max_zero_sum.max(r.f_obs.iter().sum::<f64>().abs());
        for (i, (&v, &f)) in r.v.iter().zip(&r.f_obs).enumerate() {
            let (lo, hi) = self.bounds.fairness_envelope(v);
            let excess = (lo - f).max(f - hi);
            if excess > self.max_envelope_excess {
                self.max_envelope_excess = excess;
                self.envelope_witness = Some((k, i));
            }
        }
        if k >= self.burn_in {
            let beta = self.bounds.balance_level();
            for (i, &v) in r.v.iter().enumerate() {
                self.starvation[i].observe(k, v > self.bounds.alpha_star);
                self.balance[i].observe(k, v < beta);
            }
        }
        if k >= self.opt_from {
            self.opt_total += 1;
            for (i, t) in self.specs.iter().enumerate() {
                let s_star = argmax_s(&t.utility, r.v[i], t.demand.at(k), ARGMAX_TOL);
                if (r.s[i] - s_star).abs() < OPTIMALITY_BAND {
                    self.opt_hits[i] += 1;
                }
            }
        }
    }

    fn recurrence(&self, name: &str, trackers: &[GapTracker], end: u64, level: f64, vacuous: bool) -> Verdict {
        let span = end.saturating_sub(self.burn_in);
        if vacuous || span < self.window {
            let why = if vacuous {
                "threshold is at least 1".to_string()
            } else {
                format!("only {span} steps after burn-in, window is {}", self.window)
            };
            return Verdict {
                property: name.into(),
                status: VerdictStatus::Vacuous,
                value: 0.0,
                threshold: self.window as f64,
                detail: why,
            };
        }
        let mut worst = (0, 0u64);
        for (i, t) in trackers.iter().enumerate() {
            let mut t = t.clone();
            t.close(end);
            if t.longest > worst.1 {
                worst = (i, t.longest);
            }
        }
        Verdict::new(
            name,
            worst.1 < self.window,
            worst.1 as f64,
            self.window as f64,
            format!(
                "level {level:.6e}; longest eventless run {} steps (task {}), window {}",
                worst.1, worst.0, self.window
            ),
        )
    }

    fn verdicts(&self, end: u64, breach: Option<&FeasibilityBreach>) -> Vec<Verdict> {
        let mut out = Vec::new();
        let feasible = breach.is_none() && self.max_sum_err <= SIMPLEX_SUM_TOL && self.min_v >= 0.0 && self.max_v <= 1.0;
        out.push(Verdict::new(
            "simplex",
            feasible,
            self.max_sum_err,
            SIMPLEX_SUM_TOL,
            match breach {
                Some(b) => b.to_string(),
                None => format!("shares within [{:.3e}, {:.3e}]", self.min_v, self.max_v),
            },
        ));
        out.push(Verdict::new(
            "zero_sum",
            self.max_zero_sum <= ZERO_SUM_TOL,
            self.max_zero_sum,
            ZERO_SUM_TOL,
            "max |sum F| over steps".into(),
        ));
        out.push(Verdict::new(
            "fairness_bounds",
            self.max_envelope_excess <= self.slack,
            self.max_envelope_excess,
            self.slack,
            match self.envelope_witness {
                Some((k, i)) => format!("largest excess at step {k}, task {i}"),
                None => "no steps".into(),
            },
        ));
        out.push(self.recurrence("starvation", &self.starvation, end, self.bounds.alpha_star, false));
        out.push(self.recurrence(
            "balance",
            &self.balance,
            end,
            self.bounds.balance_level(),
            self.bounds.balance_is_vacuous(),
        ));
        out.push(Verdict::new(
            "fairness_residual",
            self.min_phi_sq < self.tol_fairness,
            self.min_phi_sq,
            self.tol_fairness,
            format!("running minimum of sum Phi^2 reached at step {}", self.min_phi_sq_step),
        ));
        if self.opt_total == 0 {
            out.push(Verdict {
                property: "s_optimality".into(),
                status: VerdictStatus::Vacuous,
                value: 0.0,
                threshold: OPTIMALITY_SHARE,
                detail: "no steps in the scored window".into(),
            });
        } else {
            let (worst_task, worst) = self
                .opt_hits
                .iter()
                .enumerate()
                .map(|(i, &h)| (i, h as f64 / self.opt_total as f64))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            out.push(Verdict::new(
                "s_optimality",
                worst > OPTIMALITY_SHARE,
                worst,
                OPTIMALITY_SHARE,
                format!("lowest fraction at task {worst_task} over {} steps", self.opt_total),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub n_tasks: usize,
    pub horizon: u64,
    pub stride: u64,
    /// Steps completed before the horizon or a breach.
    pub steps_run: u64,
    pub bounds: BoundSet,
    pub window: u64,
    pub zones: Vec<ZoneSummary>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breach: Option<FeasibilityBreach>,
    #[serde(skip)]
    pub records: Vec<StepRecord>,
    #[serde(skip)]
    pub last: Option<EngineSnapshot>,
}

impl ScenarioResult {
    pub fn verdict(&self, property: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.property == property)
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status.ok())
    }

    pub fn zone(&self, index: usize) -> Option<&ZoneSummary> {
        self.zones.get(index)
    }
}

/// Runs a scenario to its horizon (or first breach), keeping every
/// `stride`-th record; monitors see every step regardless of stride.
pub fn execute(scenario: &Scenario, stride: u64) -> Result<ScenarioResult> {
    let stride = stride.max(1);
    let specs = &scenario.tasks;
    let cfg = &scenario.engine;
    let bound_set = bounds(specs, cfg)?;
    let mut engine = Engine::new(specs, cfg.clone())?;
    let mut monitors = Monitors::new(specs, cfg, bound_set);
    let mut records = Vec::new();
    let mut breach = None;
    for rec in engine.by_ref() {
        match rec {
            Ok(r) => {
                monitors.observe(&r);
                if r.step % stride == 0 {
                    records.push(r);
                }
            }
            Err(Error::Feasibility(b)) => breach = Some(b),
            Err(e) => return Err(e),
        }
    }
    let last = engine.snapshot().clone();
    let steps_run = last.step;
    if breach.is_none() {
        monitors.observe_allocation(&last.allocation());
        monitors.observe_phi(last.step, last.phi_sq_sum);
    }
    Ok(ScenarioResult {
        name: scenario.name.clone(),
        n_tasks: specs.len(),
        horizon: cfg.horizon,
        stride,
        steps_run,
        bounds: bound_set,
        window: monitors.window,
        zones: summarize(&records, &scenario.zones(), steps_run),
        verdicts: monitors.verdicts(steps_run, breach.as_ref()),
        breach,
        records,
        last: Some(last),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(horizon: u64) -> EngineConfig {
        EngineConfig {
            horizon,
            ..Default::default()
        }
    }

    #[test]
    fn identical_four_matches_study_parameters() {
        let s = build_identical_four(EngineConfig::default());
        assert_eq!(s.tasks.len(), 4);
        assert!(s.tasks.iter().all(|t| t.weight == 1.0));
        assert_eq!(s.engine.epsilon, 5e-4);
        assert_eq!(s.engine.eta_bar, 1e-3);
        assert_eq!(s.engine.zeta_bar, 1e-3);
        for (i, t) in s.tasks.iter().enumerate() {
            let (e1, e2, e3) = (t.demand.at(0), t.demand.at(40_000), t.demand.at(80_000));
            assert_eq!(e2, if i < 2 { 2.0 * e1 } else { e1 });
            assert_eq!(e3, e1);
            assert_eq!(t.demand.at(39_999), e1);
        }
        let zones = s.zones();
        assert_eq!(zones.len(), 3);
        assert_eq!((zones[1].start, zones[1].end), (40_000, 80_000));
    }

    #[test]
    fn random_build_is_deterministic_and_valid() {
        let a = build_random(30, 5, ModelMix::HomeEnergy, EngineConfig::default()).unwrap();
        let b = build_random(30, 5, ModelMix::HomeEnergy, EngineConfig::default()).unwrap();
        assert_eq!(a, b);
        for t in &a.tasks {
            assert!((0.2..=1.0).contains(&t.weight));
            let range = t.demand.range();
            assert!(range.0 >= 0.2 && range.1 <= 0.8);
            assert!(validate_assumptions(&t.utility, range, DEFAULT_GRID_N).passed());
        }
        let c = build_random(30, 6, ModelMix::HomeEnergy, EngineConfig::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mixed_models_validate() {
        let s = build_random(6, 1, ModelMix::Mixed, EngineConfig::default()).unwrap();
        assert!(matches!(
            &s.tasks[1].utility,
            UtilityModel::Affine(m) if matches!(*m.inner, UtilityModel::CpuBandwidth(_))
        ));
        assert!(build_random(0, 1, ModelMix::Mixed, EngineConfig::default()).is_err());
    }

    #[test]
    fn json_round_trip_and_ids() {
        let s = build_random(3, 2, ModelMix::Mixed, short(900)).unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.tasks[2].id, 2);
    }

    #[test]
    fn json_errors_name_the_path() {
        let text = r#"{"tasks":[{"weight":1.0,"model":{"type":"home_energy","a":2,"b":1,"c":2,"kappa":1,"h":"x"},"demand_zones":[[0,0.4]]}]}"#;
        let err = Scenario::from_json(text).unwrap_err().to_string();
        assert!(err.contains("tasks[0].model"), "{err}");
        let text = r#"{"tasks":[],"engine":{"epsilon":0.1,"bogus":1}}"#;
        assert!(Scenario::from_json(text).unwrap_err().to_string().contains("engine"));
    }

    #[test]
    fn empty_zone_is_insufficient() {
        let zones = [Zone { index: 0, start: 0, end: 10 }];
        let out = summarize(&[], &zones, 10);
        assert_eq!(out[0].status, ZoneStatus::InsufficientData);
        assert!(out[0].tail.is_none());
    }

    #[test]
    fn gap_tracker_measures_longest_quiet_stretch() {
        let mut t = GapTracker::new(10);
        for k in 10..40 {
            t.observe(k, k == 15 || k == 30);
        }
        // quiet: 10..15 (5), 16..30 (14), 31..40 (9)
        t.close(40);
        assert_eq!(t.longest, 14);
    }

    #[test]
    fn short_run_summaries_are_deterministic() {
        let s = build_identical_four(short(3_000));
        let a = execute(&s, 1).unwrap();
        let b = execute(&s, 1).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.zones.len(), 3);
        assert!(a.zones.iter().all(|z| z.status == ZoneStatus::Complete));
        assert!(a.verdict("simplex").unwrap().status.ok());
        assert!(a.verdict("zero_sum").unwrap().status.ok());
        assert!(a.verdict("fairness_bounds").unwrap().status.ok());
    }

    #[test]
    fn single_task_balance_is_vacuous() {
        let mut s = build_identical_four(short(2_000));
        s.tasks.truncate(1);
        let r = execute(&s, 10).unwrap();
        assert_eq!(r.verdict("balance").unwrap().status, VerdictStatus::Vacuous);
        assert!(r.verdict("simplex").unwrap().status.ok());
    }

    #[test]
    fn breach_marks_zones_incomplete() {
        let mut s = build_identical_four(short(3_000));
        for t in &mut s.tasks {
            t.weight = 1.0;
        }
        let extra: Vec<TaskSpec> = (4..12)
            .map(|i| TaskSpec { id: i, ..s.tasks[3].clone() })
            .collect();
        s.tasks.extend(extra);
        let mut v = vec![0.01; 12];
        v[0] = 0.89;
        s.engine.v_init = Some(v);
        s.engine.epsilon = 0.5;
        s.engine.gamma = 1.0;
        let r = execute(&s, 1).unwrap();
        assert!(r.breach.is_some());
        assert_eq!(r.verdict("simplex").unwrap().status, VerdictStatus::Fail);
        assert!(r.zones.iter().all(|z| z.status == ZoneStatus::Incomplete));
    }
}
