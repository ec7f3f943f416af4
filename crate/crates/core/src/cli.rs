//! Command-line front end: scenario resolution, runs, verification and data
//! export.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, EngineConfig, Severity};
use crate::dynamics::StepRecord;
use crate::error::{Error, Result};
use crate::oracle::{efficient_fair_fixed_point, limit_points, tracking_gap, LimitCluster, TrackingReport};
use crate::scenario::{build_identical_four, build_random_thirty, execute, Scenario, ScenarioResult, Verdict};
use crate::utility::{validate_assumptions, AssumptionReport, DEFAULT_GRID_N};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_BREACH: u8 = 2;
/// `verify` finished but at least one property failed.
pub const EXIT_PROPERTY: u8 = 3;

/// Time span of the ODE tracking check.
pub const TRACKING_HORIZON: f64 = 2.0;
pub const TRACKING_TOL: f64 = 0.05;
pub const CROSS_ORACLE_TOL: f64 = 1e-3;
pub const RESIDUAL_TOL: f64 = 1e-6;
pub const FIXED_POINT_TOL: f64 = 1e-9;
pub const LIMIT_STARTS: usize = 8;
pub const LIMIT_T_END: f64 = 100.0;
pub const LIMIT_DT: f64 = 0.05;
pub const CLUSTER_RADIUS: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "fairalloc", version, about = "Measurement-driven fair resource allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write trace.csv, summary.json and manifest.json.
    Run(RunArgs),
    /// Simulate and check every convergence property; writes verify.json.
    Verify(RunArgs),
    /// Check configuration and utility assumptions without simulating.
    Validate(ScenarioArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON, a manifest.json from an earlier run, or a built-in
    /// name (`paper-fig5`, `paper-fig6`).
    pub scenario: String,
    /// Overrides the engine seed (and the task draw of `paper-fig6`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Engine override, e.g. `--set epsilon=1e-3`; the value is read as JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Keep every N-th step in the trace (taken from the manifest when rerunning one).
    #[arg(long)]
    pub stride: Option<u64>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario_source: String,
    pub out: PathBuf,
    pub stride: u64,
    pub formats: Vec<String>,
    pub scenario: Scenario,
}

/// Applies `key=value` overrides to an engine configuration. Unknown keys
/// and ill-typed values are rejected.
pub fn apply_overrides(cfg: &EngineConfig, sets: &[String]) -> Result<EngineConfig> {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    let map = value.as_object_mut().expect("config is an object");
    for item in sets {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not KEY=VALUE")))?;
        let parsed = serde_json::from_str(raw.trim()).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
        map.insert(key.trim().to_string(), parsed);
    }
    serde_path_to_error::deserialize(value)
        .map_err(|e| Error::Config(format!("override at `engine.{}`: {}", e.path(), e.inner())))
}

/// Resolves a built-in name or a JSON file; returns the scenario and the
/// stride recorded in a manifest, if the source was one.
pub fn resolve_scenario(args: &ScenarioArgs) -> Result<(Scenario, Option<u64>)> {
    let tune = |mut cfg: EngineConfig| -> Result<EngineConfig> {
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        apply_overrides(&cfg, &args.set)
    };
    match args.scenario.as_str() {
        "paper-fig5" => Ok((build_identical_four(tune(EngineConfig::default())?), None)),
        "paper-fig6" => Ok((build_random_thirty(tune(EngineConfig::default())?)?, None)),
        path => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read `{path}`: {e}")))?;
            let probe: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("`{path}` is not JSON: {e}")))?;
            let (mut scenario, stride) = if probe.get("scenario").is_some() && probe.get("tool_version").is_some() {
                let de = &mut serde_json::Deserializer::from_str(&text);
                let m: RunManifest = serde_path_to_error::deserialize(de)
                    .map_err(|e| Error::Config(format!("`{path}` at `{}`: {}", e.path(), e.inner())))?;
                let mut s = m.scenario;
                s.tasks.iter_mut().enumerate().for_each(|(i, t)| t.id = i);
                (s, Some(m.stride))
            } else {
                (
                    Scenario::from_json(&text).map_err(|e| Error::Config(format!("`{path}` {e}")))?,
                    None,
                )
            };
            scenario.engine = tune(scenario.engine)?;
            if scenario.name.is_empty() {
                scenario.name = Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
            }
            Ok((scenario, stride))
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    for i in 0..n {
        for q in ["v", "s", "u", "F", "Phi"] {
            h.push(format!("{q}_{i}"));
        }
    }
    h.push("phi_sq_sum".into());
    h
}

/// Writes records as CSV with 17 significant digits and LF line endings.
pub fn write_trace(path: &Path, n: usize, records: &[StepRecord]) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("cannot write `{}`: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(trace_header(n)).map_err(io)?;
    for r in records {
        let mut row = Vec::with_capacity(2 + 5 * n);
        row.push(r.step.to_string());
        for i in 0..n {
            row.extend([fmt(r.v[i]), fmt(r.s[i]), fmt(r.u[i]), fmt(r.f_obs[i]), fmt(r.phi[i])]);
        }
        row.push(fmt(r.phi_sq_sum));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("cannot write `{}`: {e}", path.display())))
}

/// Parses a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>> {
    let bad = |what: String| Error::Config(format!("`{}`: {what}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let width = rdr.headers().map_err(|e| bad(e.to_string()))?.len();
    if width < 2 || (width - 2) % 5 != 0 {
        return Err(bad(format!("unexpected column count {width}")));
    }
    let n = (width - 2) / 5;
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            row[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}, column {j}: {e}", line + 1)))
        };
        let step = row[0]
            .parse::<u64>()
            .map_err(|e| bad(format!("row {}: step: {e}", line + 1)))?;
        let mut rec = StepRecord {
            step,
            v: Vec::with_capacity(n),
            s: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            f_obs: Vec::with_capacity(n),
            phi: Vec::with_capacity(n),
            phi_sq_sum: num(width - 1)?,
        };
        for i in 0..n {
            let base = 1 + 5 * i;
            rec.v.push(num(base)?);
            rec.s.push(num(base + 1)?);
            rec.u.push(num(base + 2)?);
            rec.f_obs.push(num(base + 3)?);
            rec.phi.push(num(base + 4)?);
        }
        out.push(rec);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::Config(format!("cannot write `{}`: {e}", path.display())))
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Feasibility(_) => EXIT_BREACH,
        _ => EXIT_CONFIG,
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create `{}`: {e}", dir.display())))
}

fn stride_of(args: &RunArgs, recorded: Option<u64>) -> Result<u64> {
    match args.stride.or(recorded).unwrap_or(1) {
        0 => Err(Error::Config("stride must be at least 1".into())),
        s => Ok(s),
    }
}

/// `run`: simulate and export.
pub fn cmd_run(args: &RunArgs) -> u8 {
    match run_inner(args) {
        Ok(result) => match &result.breach {
            Some(b) => {
                eprintln!("error: {b}");
                EXIT_BREACH
            }
            None => {
                println!(
                    "{}: {} steps, {} records written to {}",
                    result.name,
                    result.steps_run,
                    result.records.len(),
                    args.out.display()
                );
                EXIT_OK
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn run_inner(args: &RunArgs) -> Result<ScenarioResult> {
    let (scenario, recorded) = resolve_scenario(&args.scenario)?;
    let stride = stride_of(args, recorded)?;
    let result = execute(&scenario, stride)?;
    create_out(&args.out)?;
    write_trace(&args.out.join("trace.csv"), scenario.tasks.len(), &result.records)?;
    write_json(&args.out.join("summary.json"), &result)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        scenario_source: args.scenario.scenario.clone(),
        out: args.out.clone(),
        stride,
        formats: vec!["csv".into(), "json".into()],
        scenario,
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(result)
}

/// Agreement between the limiting ODE and the fair fixed point for one zone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossOracle {
    pub zone: usize,
    pub demands: Vec<f64>,
    pub fixed_point: Vec<f64>,
    pub fixed_point_residual: f64,
    pub fixed_point_converged: bool,
    pub clusters: Vec<LimitCluster>,
    /// Largest sup-norm distance from a cluster to the fixed point.
    pub max_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingReport>,
    pub cross_oracle: Vec<CrossOracle>,
    pub run: ScenarioResult,
}

fn cross_oracle(scenario: &Scenario, zone: usize, start: u64) -> Result<CrossOracle> {
    let d = scenario.demands_at(start);
    let fp = efficient_fair_fixed_point(&scenario.tasks, &d, FIXED_POINT_TOL, 1_000_000);
    let clusters = limit_points(
        &scenario.tasks,
        &d,
        LIMIT_STARTS,
        scenario.engine.seed,
        LIMIT_T_END,
        LIMIT_DT,
        CLUSTER_RADIUS,
    )?;
    let max_distance = clusters
        .iter()
        .flat_map(|c| c.center.iter().zip(&fp.v).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(CrossOracle {
        zone,
        demands: d,
        fixed_point: fp.v,
        fixed_point_residual: fp.residual,
        fixed_point_converged: fp.converged,
        clusters,
        max_distance,
    })
}

/// Runs the scenario and all oracle checks; sub-checks run concurrently and
/// are reported in a fixed order.
pub fn verify(scenario: &Scenario, stride: u64) -> Result<VerifyReport> {
    let zones = scenario.zones();
    let (run, tracking, cross) = std::thread::scope(|scope| {
        let run = scope.spawn(|| execute(scenario, stride));
        let tracking = scope.spawn(|| {
            let cfg = EngineConfig {
                eta_bar: 0.0,
                zeta_bar: 0.0,
                ..scenario.engine.clone()
            };
            tracking_gap(&scenario.tasks, &cfg, TRACKING_HORIZON)
        });
        let cross: Vec<_> = zones
            .iter()
            .map(|z| scope.spawn(move || cross_oracle(scenario, z.index, z.start)))
            .collect();
        (
            run.join().expect("run thread"),
            tracking.join().expect("tracking thread"),
            cross.into_iter().map(|h| h.join().expect("oracle thread")).collect::<Vec<_>>(),
        )
    });
    let run = run?;
    let mut verdicts = run.verdicts.clone();
    let tracking = match tracking {
        Ok(rep) => {
            verdicts.push(Verdict::new(
                "ode_tracking",
                rep.gap <= TRACKING_TOL,
                rep.gap,
                TRACKING_TOL,
                format!("epsilon {:.3e}, noise off, t in [0, {}], worst at t = {:.4}", rep.epsilon, rep.t_end, rep.gap_time),
            ));
            Some(rep)
        }
        Err(e @ Error::Feasibility(_)) => {
            verdicts.push(Verdict::new("ode_tracking", false, f64::INFINITY, TRACKING_TOL, e.to_string()));
            None
        }
        Err(e) => return Err(e),
    };
    let cross = cross.into_iter().collect::<Result<Vec<_>>>()?;
    let worst_distance = cross.iter().map(|c| c.max_distance).fold(0.0, f64::max);
    let worst_residual = cross
        .iter()
        .flat_map(|c| c.clusters.iter().map(|k| k.residual).chain([c.fixed_point_residual]))
        .fold(0.0, f64::max);
    let all_converged = cross.iter().all(|c| c.fixed_point_converged);
    verdicts.push(Verdict::new(
        "cross_oracle",
        all_converged && worst_distance <= CROSS_ORACLE_TOL && worst_residual <= RESIDUAL_TOL,
        worst_distance,
        CROSS_ORACLE_TOL,
        format!(
            "{} zones, {LIMIT_STARTS} starts each; worst residual {worst_residual:.3e}{}",
            cross.len(),
            if all_converged { "" } else { "; fixed point did not converge" }
        ),
    ));
    Ok(VerifyReport {
        scenario: scenario.name.clone(),
        passed: verdicts.iter().all(|v| v.status.ok()),
        verdicts,
        tracking,
        cross_oracle: cross,
        run,
    })
}

pub fn print_table(verdicts: &[Verdict]) {
    println!("{:<18} {:<8} {:>12} {:>12}  detail", "property", "status", "value", "threshold");
    for v in verdicts {
        let status = serde_json::to_value(v.status).expect("status serializes");
        println!(
            "{:<18} {:<8} {:>12.4e} {:>12.4e}  {}",
            v.property,
            status.as_str().unwrap_or("?"),
            v.value,
            v.threshold,
            v.detail
        );
    }
}

/// `verify`: exit 0 iff every property holds.
pub fn cmd_verify(args: &RunArgs) -> u8 {
    let outcome = (|| {
        let (scenario, recorded) = resolve_scenario(&args.scenario)?;
        let stride = stride_of(args, recorded)?;
        let report = verify(&scenario, stride)?;
        create_out(&args.out)?;
        write_json(&args.out.join("verify.json"), &report)?;
        Ok(report)
    })();
    match outcome {
        Ok(report) => {
            print_table(&report.verdicts);
            if let Some(b) = &report.run.breach {
                eprintln!("error: {b}");
                EXIT_BREACH
            } else if report.passed {
                EXIT_OK
            } else {
                EXIT_PROPERTY
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskValidation {
    pub task: usize,
    pub demand_range: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_error: Option<String>,
    pub assumptions: AssumptionReport,
}

/// Configuration and per-task assumption checks, without simulating.
pub fn validate(scenario: &Scenario) -> (crate::config::ValidationReport, Vec<TaskValidation>) {
    let report = validate_config(&scenario.engine, &scenario.tasks);
    let tasks = scenario
        .tasks
        .iter()
        .map(|t| {
            let range = t.demand.range();
            TaskValidation {
                task: t.id,
                demand_range: range,
                spec_error: t.check().err().map(|e| e.to_string()),
                assumptions: validate_assumptions(&t.utility, range, DEFAULT_GRID_N),
            }
        })
        .collect();
    (report, tasks)
}

/// `validate`: exit 1 on any hard violation.
pub fn cmd_validate(args: &ScenarioArgs) -> u8 {
    let scenario = match resolve_scenario(args) {
        Ok((s, _)) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (report, tasks) = validate(&scenario);
    let mut hard = false;
    for v in &report.violations {
        let tag = match v.severity {
            Severity::Error => {
                hard = true;
                "error"
            }
            Severity::Warning => "warning",
        };
        println!("{tag}: {}: {}", v.check, v.message);
    }
    for t in &tasks {
        if let Some(msg) = &t.spec_error {
            hard = true;
            println!("error: task {}: {msg}", t.task);
        }
        let a = &t.assumptions;
        for (name, outcome) in [("bounds", Some(&a.bounds)), ("concavity", Some(&a.concavity)), ("gradient", a.gradient.as_ref())] {
            let Some(outcome) = outcome else { continue };
            if !outcome.passed {
                hard = true;
                match &outcome.witness {
                    Some(w) => println!(
                        "error: task {}: {name} fails at s={:.4}, v={:.4}, d={:.4} (value {:.6e})",
                        t.task, w.s, w.v, w.d, w.value
                    ),
                    None => println!("error: task {}: {name} fails", t.task),
                }
            }
        }
    }
    if hard {
        EXIT_CONFIG
    } else {
        println!("{}: {} tasks valid", scenario.name, tasks.len());
        EXIT_OK
    }
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    ExitCode::from(match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Validate(a) => cmd_validate(a),
    })
}
