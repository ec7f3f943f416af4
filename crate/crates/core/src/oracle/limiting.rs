//! The slow allocation dynamics with levels slaved to their maximizers, and
//! multi-start probing of its limit set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ode::{check_finite, rk4_step, step_count, OdeTrajectory};
use crate::dynamics::{fairness_index, weights};
use crate::error::{Error, Result};
use crate::task::{TaskSpec, TaskState};
use crate::utility::{argmax_s, Utility, ARGMAX_TOL};

fn efficient_levels(specs: &[TaskSpec], v: &[f64], d: &[f64]) -> Vec<f64> {
    specs
        .iter()
        .enumerate()
        .map(|(i, t)| argmax_s(&t.utility, v[i], d[i], ARGMAX_TOL))
        .collect()
}

/// `Phi(s*(v), v, d)` together with the levels and utilities it used.
pub fn efficient_phi(specs: &[TaskSpec], v: &[f64], d: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let s = efficient_levels(specs, v, d);
    let u: Vec<f64> = (0..specs.len()).map(|i| specs[i].utility.eval(s[i], v[i], d[i])).collect();
    (fairness_index(&weights(specs), &u, v), s, u)
}

/// Integrates `v' = Phi(s*(v), v, d)` by RK4, recomputing the maximizing
/// levels at every stage. Stored states carry `s = sigma = s*` and
/// `rho = u(s*, v, d)`.
pub fn integrate_limiting_ode(
    specs: &[TaskSpec],
    v_init: &[f64],
    d: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory> {
    let steps = step_count(t_end, dt)?;
    let n = specs.len();
    if v_init.len() != n || d.len() != n {
        return Err(Error::Config(format!(
            "limiting ODE got {} shares and {} demands for {n} tasks",
            v_init.len(),
            d.len()
        )));
    }
    let sum: f64 = v_init.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || v_init.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Config(format!("initial allocation is not on the simplex (sum = {sum})")));
    }
    let state = |v: &[f64]| -> Vec<TaskState> {
        let (_, s, u) = efficient_phi(specs, v, d);
        (0..n)
            .map(|i| TaskState {
                v: v[i],
                s: s[i],
                rho: u[i],
                sigma: s[i],
            })
            .collect()
    };
    let mut field = |_t: f64, v: &[f64], dv: &mut [f64]| {
        dv.copy_from_slice(&efficient_phi(specs, v, d).0);
    };
    let mut v = v_init.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(state(&v));
    for j in 0..steps {
        let t = j as f64 * dt;
        let h = dt.min(t_end - t);
        v = rk4_step(&mut field, t, &v, h);
        check_finite(t + h, &v)?;
        times.push(t + h);
        states.push(state(&v));
    }
    Ok(OdeTrajectory { times, states })
}

/// Endpoints of the limiting ODE that fall within one cluster radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCluster {
    pub center: Vec<f64>,
    pub members: usize,
    /// `max_i |Phi_i(s*(center), center, d)|`.
    pub residual: f64,
}

/// Uniform draw from the simplex (flat Dirichlet via normalized exponentials).
pub fn random_simplex_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|x| x / total).collect()
}

/// Integrates from `starts` random simplex points and groups the endpoints
/// greedily at sup-norm `radius`. The result is a report of what was found,
/// not a claim that the limit set is a single point.
pub fn limit_points(
    specs: &[TaskSpec],
    d: &[f64],
    starts: usize,
    seed: u64,
    t_end: f64,
    dt: f64,
    radius: f64,
) -> Result<Vec<LimitCluster>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clusters: Vec<(Vec<f64>, usize)> = Vec::new();
    for _ in 0..starts {
        let v0 = random_simplex_point(&mut rng, specs.len());
        let end = integrate_limiting_ode(specs, &v0, d, t_end, dt)?.terminal_allocation();
        let near = clusters.iter_mut().find(|(c, _)| {
            c.iter().zip(&end).all(|(a, b)| (a - b).abs() <= radius)
        });
        match near {
            Some((_, members)) => *members += 1,
            None => clusters.push((end, 1)),
        }
    }
    Ok(clusters
        .into_iter()
        .map(|(center, members)| {
            let residual = efficient_phi(specs, &center, d).0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            LimitCluster {
                center,
                members,
                residual,
            }
        })
        .collect())
}
