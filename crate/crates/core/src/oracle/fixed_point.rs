//! Fair allocations by damped fixed-point iteration.
//!
//! A fair allocation satisfies `v_i = w_i / sum_j w_j` with `w_i = lambda_i / u_i`,
//! so it is a fixed point of `v -> normalize(lambda / u(s, v, d))`. Plain
//! iteration can cycle when `u` depends strongly on `v`; the update is
//! therefore relaxed by one half.

use serde::{Deserialize, Serialize};

use crate::dynamics::{fairness_index, weights};
use crate::task::TaskSpec;
use crate::utility::{argmax_s, Utility, ARGMAX_TOL};

const RELAXATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub v: Vec<f64>,
    /// Levels at which the residual was evaluated.
    pub s: Vec<f64>,
    pub iterations: usize,
    /// `max_i |Phi_i(s, v, d)|`.
    pub residual: f64,
    /// Sup-norm change of the final iteration.
    pub last_change: f64,
    pub converged: bool,
}

fn iterate<L>(specs: &[TaskSpec], d: &[f64], tol: f64, max_iter: usize, mut levels: L) -> FixedPointResult
where
    L: FnMut(&[f64]) -> Vec<f64>,
{
    let n = specs.len();
    let lambda = weights(specs);
    let utilities = |s: &[f64], v: &[f64]| -> Vec<f64> {
        (0..n).map(|i| specs[i].utility.eval(s[i], v[i], d[i])).collect()
    };
    let mut v = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    loop {
        let s = levels(&v);
        let u = utilities(&s, &v);
        let residual = fairness_index(&lambda, &u, &v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if (last_change < tol && residual <= 10.0 * tol) || iterations >= max_iter {
            return FixedPointResult {
                converged: last_change < tol && residual <= 10.0 * tol,
                v,
                s,
                iterations,
                residual,
                last_change,
            };
        }
        let w: Vec<f64> = lambda.iter().zip(&u).map(|(l, u)| l / u).collect();
        let total: f64 = w.iter().sum();
        let next: Vec<f64> = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| (1.0 - RELAXATION) * vi + RELAXATION * wi / total)
            .collect();
        last_change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        iterations += 1;
    }
}

/// Fair allocation at fixed levels `s` and demands `d`, iterated from the
/// uniform allocation until the step is below `tol` and the residual is at
/// most `10 tol`. Non-convergence is reported through `converged`.
pub fn fair_fixed_point(specs: &[TaskSpec], s: &[f64], d: &[f64], tol: f64, max_iter: usize) -> FixedPointResult {
    iterate(specs, d, tol, max_iter, |_| s.to_vec())
}

/// Fair allocation where every task runs at its utility-maximizing level for
/// the current share; the levels are re-optimized at every iterate.
pub fn efficient_fair_fixed_point(specs: &[TaskSpec], d: &[f64], tol: f64, max_iter: usize) -> FixedPointResult {
    iterate(specs, d, tol, max_iter, |v| {
        specs
            .iter()
            .zip(v)
            .zip(d)
            .map(|((t, &vi), &di)| argmax_s(&t.utility, vi, di, ARGMAX_TOL))
            .collect()
    })
}
