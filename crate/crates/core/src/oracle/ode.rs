//! Classical RK4 and the full mean-field system on the `t = epsilon k` timescale.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::dynamics::{fairness_index, weights, RATIO_GUARD};
use crate::error::{Error, Result};
use crate::task::{TaskSpec, TaskState};
use crate::utility::Utility;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<TaskState>>,
}

impl OdeTrajectory {
    pub fn allocation_at(&self, idx: usize) -> Vec<f64> {
        self.states[idx].iter().map(|x| x.v).collect()
    }

    pub fn terminal(&self) -> &[TaskState] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terminal_allocation(&self) -> Vec<f64> {
        self.terminal().iter().map(|x| x.v).collect()
    }
}

/// One classical fourth-order Runge-Kutta step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], dt: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4);
    (0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

pub(crate) fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    match y.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            time: t,
            what: format!("state component {i} = {}", y[i]),
        }),
        None => Ok(()),
    }
}

/// Number of whole steps of size `dt` in `[0, t_end]`, tolerant of rounding.
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("invalid integration grid: t_end = {t_end}, dt = {dt}")));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

fn pack(states: &[TaskState]) -> Vec<f64> {
    let n = states.len();
    let mut y = vec![0.0; 4 * n];
    for (i, x) in states.iter().enumerate() {
        y[i] = x.v;
        y[n + i] = x.s;
        y[2 * n + i] = x.rho;
        y[3 * n + i] = x.sigma;
    }
    y
}

fn unpack(y: &[f64]) -> Vec<TaskState> {
    let n = y.len() / 4;
    (0..n)
        .map(|i| TaskState {
            v: y[i],
            s: y[n + i],
            rho: y[2 * n + i],
            sigma: y[3 * n + i],
        })
        .collect()
}

/// Integrates the coupled allocation, level and filter system
///
/// ```text
/// v'     = Phi(s, v, d)
/// s'     = mu tanh((u - rho) / (s - sigma))
/// rho'   = mu gamma (u - rho)
/// sigma' = mu gamma (s - sigma)
/// ```
///
/// with the same ratio guard as the discrete update and `s` clamped to
/// `[0, 1]` after every step. Demand at time `t` is the demand of step
/// `floor(t / epsilon)`. The level equations are stiff (rate `mu gamma`), so
/// `dt` must stay well below `2.78 / (mu gamma)`. The level field also jumps
/// across `s = sigma`, which limits RK4 to roughly first order there; paths
/// that slide along that surface need `dt` near `1e-5` to settle.
pub fn integrate_full_ode(
    specs: &[TaskSpec],
    cfg: &EngineConfig,
    init: &[TaskState],
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory> {
    integrate_full_ode_sampled(specs, cfg, init, t_end, dt, 1)
}

/// As [`integrate_full_ode`], storing only every `every`-th state (and the
/// final one).
pub fn integrate_full_ode_sampled(
    specs: &[TaskSpec],
    cfg: &EngineConfig,
    init: &[TaskState],
    t_end: f64,
    dt: f64,
    every: usize,
) -> Result<OdeTrajectory> {
    let every = every.max(1);
    let steps = step_count(t_end, dt)?;
    let n = specs.len();
    if init.len() != n {
        return Err(Error::Config(format!("{} initial states for {n} tasks", init.len())));
    }
    let lambda = weights(specs);
    let mu = cfg.mu();
    let gamma = cfg.gamma;
    let eps = cfg.epsilon;

    let mut field = |t: f64, y: &[f64], dy: &mut [f64]| {
        let k = (t / eps + 1e-9).floor().max(0.0) as u64;
        let (v, rest) = y.split_at(n);
        let (s, rest) = rest.split_at(n);
        let (rho, sigma) = rest.split_at(n);
        let u: Vec<f64> = (0..n)
            .map(|i| specs[i].utility.eval(s[i], v[i], specs[i].demand.at(k)))
            .collect();
        let phi = fairness_index(&lambda, &u, v);
        for i in 0..n {
            let du = gamma * (u[i] - rho[i]);
            let ds = gamma * (s[i] - sigma[i]);
            dy[i] = phi[i];
            dy[n + i] = if ds.abs() < RATIO_GUARD { 0.0 } else { mu * (du / ds).tanh() };
            dy[2 * n + i] = mu * du;
            dy[3 * n + i] = mu * ds;
        }
    };

    let mut y = pack(init);
    check_finite(0.0, &y)?;
    let mut times = Vec::with_capacity(steps / every + 2);
    let mut states = Vec::with_capacity(steps / every + 2);
    times.push(0.0);
    states.push(init.to_vec());
    for j in 0..steps {
        let t = j as f64 * dt;
        let h = dt.min(t_end - t);
        y = rk4_step(&mut field, t, &y, h);
        for s in &mut y[n..2 * n] {
            *s = s.clamp(0.0, 1.0);
        }
        check_finite(t + h, &y)?;
        if (j + 1) % every == 0 || j + 1 == steps {
            times.push(t + h);
            states.push(unpack(&y));
        }
    }
    Ok(OdeTrajectory { times, states })
}
