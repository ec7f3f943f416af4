//! Utility models `u(s, v, d)` and their assumption checks.
//!
//! Every model must stay inside `[1, c)` for its declared bound `c` and be
//! concave in the operation level `s`. Raw physical models rarely satisfy
//! the bound out of the box; [`AffineNormalizer::fit`] rescales them into `[1, c]`
//! without moving the maximizer in `s`.

use serde::{Deserialize, Serialize};

/// Relative headroom added to analytic suprema so that `u < c` holds strictly.
const SUP_MARGIN: f64 = 1e-9;

/// Tolerance on the centered second difference in `s`.
pub const CONCAVITY_TOL: f64 = 1e-8;

/// Central finite-difference step for gradient checks.
pub const GRAD_FD_STEP: f64 = 1e-5;

/// Gradient agreement in `validate_assumptions`: `|fd - exact| <= tol * (1 + |exact|)`.
pub const GRAD_REL_TOL: f64 = 1e-6;

/// Bracket width at which the maximizer search stops.
pub const ARGMAX_TOL: f64 = 1e-10;

/// Default lattice resolution for assumption checks.
pub const DEFAULT_GRID_N: usize = 33;

/// Default validity floor for the CPU bandwidth model.
pub const DEFAULT_V_FLOOR: f64 = 1e-3;

/// A performance function of operation level, resource share and demand.
pub trait Utility {
    fn eval(&self, s: f64, v: f64, d: f64) -> f64;

    /// Exact `du/ds`, for models that know it.
    fn grad_s(&self, _s: f64, _v: f64, _d: f64) -> Option<f64> {
        None
    }

    /// Declared upper bound `c > 1` with `u < c` everywhere on the domain.
    fn bound_c(&self) -> f64;

    /// Smallest resource share at which the model is evaluated literally.
    fn v_floor(&self) -> f64 {
        0.0
    }
}

/// `u = a (kappa - (s - d)^2) + b (v - h s) + c`: comfort minus energy cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeEnergyModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kappa: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_c: Option<f64>,
}

impl HomeEnergyModel {
    pub fn new(a: f64, b: f64, c: f64, kappa: f64, h: f64) -> Self {
        Self {
            a,
            b,
            c,
            kappa,
            h,
            bound_c: None,
        }
    }
}

impl Utility for HomeEnergyModel {
    fn eval(&self, s: f64, v: f64, d: f64) -> f64 {
        let gap = s - d;
        self.a * (self.kappa - gap * gap) + self.b * (v - self.h * s) + self.c
    }

    fn grad_s(&self, s: f64, _v: f64, d: f64) -> Option<f64> {
        Some(-2.0 * self.a * (s - d) - self.b * self.h)
    }

    fn bound_c(&self) -> f64 {
        // sup over s, v in [0, 1]: comfort <= kappa, v - h s <= 1
        self.bound_c
            .unwrap_or_else(|| (self.a * self.kappa + self.b + self.c) * (1.0 + SUP_MARGIN))
    }
}

/// `u = -a (h - theta s / v)^2 + b`: response time `theta s / v` against the
/// soft deadline `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpuBandwidthModel {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub theta: f64,
    #[serde(default = "default_v_floor")]
    pub v_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_c: Option<f64>,
}

fn default_v_floor() -> f64 {
    DEFAULT_V_FLOOR
}

impl CpuBandwidthModel {
    pub fn new(a: f64, b: f64, h: f64, theta: f64) -> Self {
        Self {
            a,
            b,
            h,
            theta,
            v_floor: DEFAULT_V_FLOOR,
            bound_c: None,
        }
    }

    /// Response time `R = theta s / v`, with `v` held at the floor.
    pub fn response_time(&self, s: f64, v: f64) -> f64 {
        self.theta * s / v.max(self.v_floor)
    }
}

impl Utility for CpuBandwidthModel {
    fn eval(&self, s: f64, v: f64, _d: f64) -> f64 {
        let lag = self.h - self.response_time(s, v);
        -self.a * lag * lag + self.b
    }

    fn grad_s(&self, s: f64, v: f64, _d: f64) -> Option<f64> {
        let rate = self.theta / v.max(self.v_floor);
        Some(2.0 * self.a * rate * (self.h - rate * s))
    }

    fn bound_c(&self) -> f64 {
        self.bound_c.unwrap_or(self.b * (1.0 + SUP_MARGIN))
    }

    fn v_floor(&self) -> f64 {
        self.v_floor
    }
}

/// `scale * inner + shift`, with its own declared bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineNormalizer {
    pub inner: Box<UtilityModel>,
    pub scale: f64,
    pub shift: f64,
    pub bound_c: f64,
}

impl AffineNormalizer {
    /// Fits `scale` and `shift` so that the model spans `[1, c_target]` over
    /// the lattice `s, v in [floor, 1]`, `d in demand_range`.
    ///
    /// The upper end also includes the per-`(v, d)` maximum over `s`, which a
    /// coarse lattice can miss. A relative margin of `1e-9` of the span keeps
    /// both ends strictly inside the target interval.
    pub fn fit(inner: UtilityModel, demand_range: (f64, f64), grid_n: usize, c_target: f64) -> Self {
        let grid = Lattice::new(grid_n.max(2), inner.v_floor(), demand_range);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (s, v, d) in grid.points() {
            let u = inner.eval(s, v, d);
            lo = lo.min(u);
            hi = hi.max(u);
        }
        for v in grid.v_axis() {
            for d in grid.d_axis() {
                let s = argmax_s(&inner, v, d, ARGMAX_TOL);
                hi = hi.max(inner.eval(s, v, d));
            }
        }
        let span = c_target - 1.0;
        let margin = span * 5e-10;
        let (scale, shift) = if hi - lo > 0.0 {
            let scale = (span - 2.0 * margin) / (hi - lo);
            (scale, 1.0 + margin - scale * lo)
        } else {
            (1.0, 1.0 + 0.5 * span - lo)
        };
        Self {
            inner: Box::new(inner),
            scale,
            shift,
            bound_c: c_target,
        }
    }
}

impl Utility for AffineNormalizer {
    fn eval(&self, s: f64, v: f64, d: f64) -> f64 {
        self.scale * self.inner.eval(s, v, d) + self.shift
    }

    fn grad_s(&self, s: f64, v: f64, d: f64) -> Option<f64> {
        self.inner.grad_s(s, v, d).map(|g| self.scale * g)
    }

    fn bound_c(&self) -> f64 {
        self.bound_c
    }

    fn v_floor(&self) -> f64 {
        self.inner.v_floor()
    }
}

/// Closed set of models that can appear in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UtilityModel {
    HomeEnergy(HomeEnergyModel),
    CpuBandwidth(CpuBandwidthModel),
    Affine(AffineNormalizer),
}

impl UtilityModel {
    pub fn normalized(self, demand_range: (f64, f64), grid_n: usize, c_target: f64) -> Self {
        UtilityModel::Affine(AffineNormalizer::fit(self, demand_range, grid_n, c_target))
    }

    fn as_dyn(&self) -> &dyn Utility {
        match self {
            UtilityModel::HomeEnergy(m) => m,
            UtilityModel::CpuBandwidth(m) => m,
            UtilityModel::Affine(m) => m,
        }
    }
}

impl Utility for UtilityModel {
    fn eval(&self, s: f64, v: f64, d: f64) -> f64 {
        self.as_dyn().eval(s, v, d)
    }

    fn grad_s(&self, s: f64, v: f64, d: f64) -> Option<f64> {
        self.as_dyn().grad_s(s, v, d)
    }

    fn bound_c(&self) -> f64 {
        self.as_dyn().bound_c()
    }

    fn v_floor(&self) -> f64 {
        self.as_dyn().v_floor()
    }
}

/// Maximizer of `u(., v, d)` over `[0, 1]`, to within `tol`.
///
/// Valid for models concave in `s`. Models with an exact gradient are solved
/// by bisection on its sign; others by golden-section search on `u`, where
/// both endpoints are compared at the end so boundary optima are returned
/// exactly.
pub fn argmax_s<U: Utility + ?Sized>(model: &U, v: f64, d: f64, tol: f64) -> f64 {
    if model.grad_s(0.5, v, d).is_some() {
        return bisect_gradient(model, v, d, tol);
    }
    let f = |s: f64| model.eval(s, v, d);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [mid, 0.0, 1.0]
        .into_iter()
        .map(|s| (s, f(s)))
        .fold((mid, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
        .0
}

/// Root of the decreasing `du/ds`, clamped to `[0, 1]`. A search on `u` alone
/// stalls near `sqrt(machine epsilon)` at a flat top; the gradient sign does not.
fn bisect_gradient<U: Utility + ?Sized>(model: &U, v: f64, d: f64, tol: f64) -> f64 {
    let g = |s: f64| model.grad_s(s, v, d).unwrap_or(0.0);
    if g(0.0) <= 0.0 {
        return 0.0;
    }
    if g(1.0) >= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regular `grid_n^3` lattice over `s in [0,1]`, `v in [v_lo, 1]`, `d in [d_lo, d_hi]`.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub grid_n: usize,
    pub v_lo: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl Lattice {
    pub fn new(grid_n: usize, v_lo: f64, demand_range: (f64, f64)) -> Self {
        Self {
            grid_n,
            v_lo,
            d_lo: demand_range.0,
            d_hi: demand_range.1,
        }
    }

    fn node(&self, lo: f64, hi: f64, i: usize) -> f64 {
        if i + 1 == self.grid_n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (self.grid_n - 1) as f64
        }
    }

    pub fn s_spacing(&self) -> f64 {
        1.0 / (self.grid_n - 1) as f64
    }

    pub fn s_axis(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid_n).map(|i| self.node(0.0, 1.0, i))
    }

    pub fn v_axis(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid_n).map(|i| self.node(self.v_lo, 1.0, i))
    }

    pub fn d_axis(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid_n).map(|i| self.node(self.d_lo, self.d_hi, i))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.s_axis().flat_map(move |s| {
            self.v_axis()
                .flat_map(move |v| self.d_axis().map(move |d| (s, v, d)))
        })
    }
}

/// A lattice point and the checked quantity there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub s: f64,
    pub v: f64,
    pub d: f64,
    pub value: f64,
}

/// Outcome of one assumption check; `witness` is the worst violation found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub witness: Option<LatticePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `1 <= u < c`.
    pub bounds: CheckOutcome,
    /// Non-positive second difference in `s`.
    pub concavity: CheckOutcome,
    /// Finite-difference gradient against the exact one; `None` when the
    /// model has no exact gradient.
    pub gradient: Option<CheckOutcome>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.bounds.passed
            && self.concavity.passed
            && self.gradient.as_ref().map_or(true, |g| g.passed)
    }
}

/// Checks bounds, concavity and (when available) the exact gradient on a
/// `grid_n^3` lattice over `(s, v, d)`, with `v` starting at the model floor.
pub fn validate_assumptions<U: Utility + ?Sized>(
    model: &U,
    demand_range: (f64, f64),
    grid_n: usize,
) -> AssumptionReport {
    assert!(grid_n >= 3, "validation lattice needs at least 3 nodes per axis");
    let grid = Lattice::new(grid_n, model.v_floor(), demand_range);
    let c = model.bound_c();
    let hs = grid.s_spacing();

    let mut bounds = Tracker::default();
    let mut concavity = Tracker::default();
    let mut gradient = Tracker::default();
    let mut has_grad = false;

    for (s, v, d) in grid.points() {
        let u = model.eval(s, v, d);
        // u == c counts as a violation of the strict bound
        let excess = if u < 1.0 {
            1.0 - u
        } else if u >= c {
            (u - c).max(f64::MIN_POSITIVE)
        } else if u.is_nan() {
            f64::INFINITY
        } else {
            0.0
        };
        bounds.observe(excess, LatticePoint { s, v, d, value: u });

        if s > 0.0 && s < 1.0 {
            let second = model.eval(s + hs, v, d) - 2.0 * u + model.eval(s - hs, v, d);
            concavity.observe(second - CONCAVITY_TOL, LatticePoint { s, v, d, value: second });
        }

        if let Some(exact) = model.grad_s(s, v, d) {
            has_grad = true;
            let fd = (model.eval(s + GRAD_FD_STEP, v, d) - model.eval(s - GRAD_FD_STEP, v, d))
                / (2.0 * GRAD_FD_STEP);
            let err = (fd - exact).abs();
            gradient.observe(
                err - GRAD_REL_TOL * (1.0 + exact.abs()),
                LatticePoint { s, v, d, value: err },
            );
        }
    }

    AssumptionReport {
        bounds: bounds.finish(),
        concavity: concavity.finish(),
        gradient: has_grad.then(|| gradient.finish()),
    }
}

/// Keeps the worst positive excess seen so far.
#[derive(Default)]
struct Tracker {
    worst: Option<(f64, LatticePoint)>,
}

impl Tracker {
    fn observe(&mut self, excess: f64, point: LatticePoint) {
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if excess <= 0.0 {
            return;
        }
        if self.worst.map_or(true, |(w, _)| excess > w) {
            self.worst = Some((excess, point));
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            passed: self.worst.is_none(),
            witness: self.worst.map(|(_, p)| p),
        }
    }
}
