//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use fairalloc::oracle::{efficient_fair_fixed_point, limit_points, tracking_gap};
use fairalloc::scenario::{
    build_identical_four, build_random, build_random_thirty, execute, ModelMix, Scenario, ScenarioResult,
};
use fairalloc::utility::{argmax_s, validate_assumptions, CpuBandwidthModel, HomeEnergyModel, ARGMAX_TOL, DEFAULT_GRID_N};
use fairalloc::{DemandSchedule, EngineConfig, Utility, UtilityModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self { ok, detail: detail.into() }
    }
}

fn run(s: &Scenario) -> ScenarioResult {
    execute(s, 1).expect("scenario runs")
}

fn verdict_ok(r: &ScenarioResult, property: &str) -> (bool, String) {
    let v = r.verdict(property).expect("verdict present");
    (v.status.ok(), format!("{} {:?} value {:.4e} vs {:.4e}", r.name, v.status, v.value, v.threshold))
}

fn tail_means(r: &ScenarioResult, zone: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let tail = r.zone(zone)?.tail.as_ref()?;
    Some((tail.v.iter().map(|s| s.mean).collect(), tail.abs_f_mean.clone()))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c1(fig5: &ScenarioResult, secs: f64) -> Outcome {
    let Some((v, f)) = tail_means(fig5, 0) else {
        return Outcome::new(false, "zone e1 has no tail statistics");
    };
    let dv = v.iter().map(|x| (x - 0.25).abs()).fold(0.0, f64::max);
    let fmax = f.iter().copied().fold(0.0, f64::max);
    Outcome::new(
        fig5.breach.is_none() && dv <= 0.02 && fmax < 0.02 && secs < 10.0,
        format!("max |v - 1/4| {dv:.3e}, max tail |F| {fmax:.3e}, runtime {secs:.2} s"),
    )
}

fn c2(fig5: &ScenarioResult) -> Outcome {
    let (Some((e1, _)), Some((e2, _)), Some((e3, _))) = (tail_means(fig5, 0), tail_means(fig5, 1), tail_means(fig5, 2))
    else {
        return Outcome::new(false, "missing zone tail statistics");
    };
    let shift = max_gap(&e1, &e2);
    let back = max_gap(&e1, &e3);
    Outcome::new(
        shift > 0.01 && back <= 0.02,
        format!("e2 shift {shift:.4e} (> 1e-2), e3 return {back:.4e} (<= 2e-2)"),
    )
}

fn breach_scenario() -> Scenario {
    let cfg = EngineConfig {
        epsilon: 0.1,
        gamma: 5.0,
        ..Default::default()
    };
    let mut s = build_random_thirty(cfg).expect("random study builds");
    let n = s.tasks.len();
    let share = 1.0 / n as f64;
    let s0 = s.engine.s_init;
    let pressure: Vec<f64> = s
        .tasks
        .iter()
        .map(|t| t.weight / t.utility.eval(s0, share, t.demand.at(0)))
        .collect();
    let k = (0..n).min_by(|&a, &b| pressure[a].total_cmp(&pressure[b])).unwrap();
    let mut v = vec![0.01; n];
    v[k] = 1.0 - 0.01 * (n - 1) as f64;
    s.engine.v_init = Some(v);
    s
}

fn c3(fig5: &ScenarioResult, fig6: &ScenarioResult) -> Outcome {
    let (a, da) = verdict_ok(fig5, "simplex");
    let (b, db) = verdict_ok(fig6, "simplex");
    let full = fig5.breach.is_none() && fig6.breach.is_none() && fig5.steps_run == fig5.horizon && fig6.steps_run == fig6.horizon;
    let breach = run(&breach_scenario()).breach;
    let bdetail = match &breach {
        Some(b) => format!("epsilon 0.1: {b}"),
        None => "epsilon 0.1: no breach".into(),
    };
    Outcome::new(a && b && full && breach.is_some(), format!("{da}; {db}; {bdetail}"))
}

fn single(r: &ScenarioResult, property: &str) -> Outcome {
    let (ok, d) = verdict_ok(r, property);
    Outcome::new(ok && r.breach.is_none(), format!("{d}; window {}", r.window))
}

fn c6() -> Outcome {
    let cfg = EngineConfig {
        freeze_levels: true,
        eta_bar: 1e-3,
        ..Default::default()
    };
    let mut scenarios = vec![build_identical_four(cfg.clone())];
    for seed in 1..=5 {
        scenarios.push(build_random(5, seed, ModelMix::Mixed, cfg.clone()).expect("instance builds"));
    }
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for s in &scenarios {
        let r = run(s);
        let v = r.verdict("fairness_residual").expect("verdict present");
        ok &= v.status.ok() && r.breach.is_none();
        worst = worst.max(v.value);
    }
    Outcome::new(ok, format!("{} runs, worst running minimum {worst:.3e} vs {:.3e}", scenarios.len(), 10.0 * (cfg.epsilon + 1e-6)))
}

fn c7() -> Outcome {
    let cfg = EngineConfig {
        eta_bar: 0.0,
        zeta_bar: 1e-4,
        gamma: 100.0,
        ..Default::default()
    };
    single(&run(&build_identical_four(cfg)), "s_optimality")
}

fn tracking_gaps(specs: &[fairalloc::TaskSpec], v0: &[f64], s0: f64) -> Result<Vec<f64>, String> {
    [1e-3, 5e-4, 1e-4]
        .into_iter()
        .map(|eps| {
            let cfg = EngineConfig {
                epsilon: eps,
                eta_bar: 0.0,
                zeta_bar: 0.0,
                s_init: s0,
                v_init: Some(v0.to_vec()),
                ..Default::default()
            };
            tracking_gap(specs, &cfg, 2.0).map(|r| r.gap).map_err(|e| format!("epsilon {eps:e}: {e}"))
        })
        .collect()
}

// Levels start at the maximizer for the initial allocation. From an
// unsettled start the level transient crosses s = sigma, where the discrete
// map chatters and the ODE slides; that gap stalls near 5e-3 and is reported
// for information only.
fn c8() -> Outcome {
    let start = Instant::now();
    let mut specs = build_identical_four(EngineConfig::default()).tasks;
    for t in &mut specs {
        t.demand = DemandSchedule::constant(0.4);
    }
    let v0 = [0.7, 0.1, 0.1, 0.1];
    let settled = argmax_s(&specs[0].utility, v0[0], 0.4, ARGMAX_TOL);
    let gaps = match tracking_gaps(&specs, &v0, settled) {
        Ok(g) => g,
        Err(e) => return Outcome::new(false, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let unsettled = tracking_gaps(&specs, &v0, EngineConfig::default().s_init)
        .map(|g| format!("{:.3e} / {:.3e} / {:.3e}", g[0], g[1], g[2]))
        .unwrap_or_else(|e| e);
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        gaps[0] <= 0.05 && gaps[2] <= 0.01 && monotone && secs < 30.0,
        format!(
            "gaps {:.3e} / {:.3e} / {:.3e} at epsilon 1e-3 / 5e-4 / 1e-4 from s = {settled:.4}, runtime {secs:.2} s; from s = 0.5: {unsettled}",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn c9() -> Outcome {
    let mut worst_dist: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut ok = true;
    for j in 0..20u64 {
        let n = 2 + (j % 9) as usize;
        let s = build_random(n, j, ModelMix::Mixed, EngineConfig::default()).expect("instance builds");
        let d = s.demands_at(0);
        let fp = efficient_fair_fixed_point(&s.tasks, &d, 1e-9, 1_000_000);
        let clusters = match limit_points(&s.tasks, &d, 8, j, 100.0, 0.05, 1e-3) {
            Ok(c) => c,
            Err(e) => return Outcome::new(false, format!("instance {j}: {e}")),
        };
        ok &= fp.converged;
        worst_res = worst_res.max(fp.residual);
        for c in &clusters {
            worst_dist = worst_dist.max(max_gap(&c.center, &fp.v));
            worst_res = worst_res.max(c.residual);
        }
    }
    ok &= worst_dist <= 1e-3 && worst_res <= 1e-6;
    Outcome::new(ok, format!("20 instances, worst distance {worst_dist:.3e}, worst residual {worst_res:.3e}"))
}

fn random_home(rng: &mut ChaCha8Rng) -> UtilityModel {
    UtilityModel::HomeEnergy(HomeEnergyModel::new(
        rng.random_range(1.0..3.0),
        rng.random_range(0.5..1.5),
        rng.random_range(1.0..3.0),
        rng.random_range(0.5..1.5),
        rng.random_range(0.2..0.8),
    ))
}

fn random_cpu(rng: &mut ChaCha8Rng) -> UtilityModel {
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

fn c10() -> Outcome {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut concave = true;
    let families: [(&str, fn(&mut ChaCha8Rng) -> UtilityModel); 2] = [("home", random_home), ("cpu", random_cpu)];
    for (_, draw) in families {
        for normalized in [false, true] {
            for _ in 0..1000 {
                let mut m = draw(&mut rng);
                if normalized {
                    m = m.normalized((0.2, 0.8), DEFAULT_GRID_N, 2.0);
                }
                let s = rng.random_range(H..1.0 - H);
                let v = rng.random_range(m.v_floor()..=1.0);
                let d = rng.random_range(0.2..=0.8);
                let exact = m.grad_s(s, v, d).expect("analytic gradient");
                let fd = (m.eval(s + H, v, d) - m.eval(s - H, v, d)) / (2.0 * H);
                worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
            }
            for _ in 0..20 {
                let mut m = draw(&mut rng);
                if normalized {
                    m = m.normalized((0.2, 0.8), DEFAULT_GRID_N, 2.0);
                }
                concave &= validate_assumptions(&m, (0.2, 0.8), DEFAULT_GRID_N).concavity.passed;
            }
        }
    }
    Outcome::new(
        worst <= 1e-4 && concave,
        format!("4 x 1000 points, worst relative gradient error {worst:.3e}; concavity on 80 lattices {}", if concave { "holds" } else { "fails" }),
    )
}

fn main() -> ExitCode {
    let t = Instant::now();
    let fig5 = run(&build_identical_four(EngineConfig::default()));
    let fig5_secs = t.elapsed().as_secs_f64();
    let fig6 = run(&build_random_thirty(EngineConfig::default()).expect("random study builds"));

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("C1 identical-task equilibrium", Box::new(|| c1(&fig5, fig5_secs))),
        ("C2 demand adaptation", Box::new(|| c2(&fig5))),
        ("C3 feasibility", Box::new(|| c3(&fig5, &fig6))),
        ("C4 starvation avoidance", Box::new(|| single(&fig6, "starvation"))),
        ("C5 balance", Box::new(|| single(&fig6, "balance"))),
        ("C6 fairness recurrence", Box::new(c6)),
        ("C7 operation-level optimality", Box::new(c7)),
        ("C8 ODE tracking", Box::new(c8)),
        ("C9 cross-oracle agreement", Box::new(c9)),
        ("C10 utility calculus", Box::new(c10)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += usize::from(!o.ok);
        println!("[{}] {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
