//! Command implementations behind the `smart` binary: single trials with
//! optional replay traces, benchmark grids, and SVG snapshots.

pub mod bench;
pub mod svg;
pub mod trace;

use smart_core::sim::{run_trial, run_trial_with_sink, Scenario, ScenarioError};
use std::fmt;
use std::path::Path;

/// Command errors, split by exit code: configuration/usage problems exit 2,
/// runtime failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| match e {
        ScenarioError::Io { ref path, .. } if !Path::new(path).exists() => {
            CliError::Config(format!("scenario not found: {path}"))
        }
        other => CliError::Config(other.to_string()),
    })
}

/// `run`: execute one trial and report its outcome on one line.
pub fn cmd_run(
    scenario_path: &Path,
    seed: Option<u64>,
    trace_path: Option<&Path>,
    ideal_replan: bool,
) -> Result<String, CliError> {
    let mut scenario = load_scenario(scenario_path)?;
    if let Some(seed) = seed {
        scenario.config.base_seed = seed;
    }
    if ideal_replan {
        scenario.config.replan_charge = 0.0;
    }
    let (result, telemetry) = match trace_path {
        Some(out) => {
            let mut writer = trace::TraceWriter::new();
            let pair = run_trial_with_sink(&scenario, 0, &mut writer);
            std::fs::write(out, &writer.buffer)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
            pair
        }
        None => run_trial(&scenario, 0),
    };
    let travel = result
        .travel_time
        .map(|t| format!("{t:.3}"))
        .unwrap_or_else(|| "-".into());
    let wall_ms: Vec<f64> = telemetry
        .wall_replans
        .iter()
        .map(|d| d.as_secs_f64() * 1e3)
        .collect();
    Ok(format!(
        "success={} collision={} travel_s={} replans={} failed_ticks={} wall_replan_mean_ms={:.3}",
        result.success,
        result.collision,
        travel,
        result.replan_count,
        result.failed_ticks,
        bench::mean(&wall_ms),
    ))
}

/// `bench`: run a (count x speed) grid and emit the CSV report.
#[allow(clippy::too_many_arguments)]
pub fn cmd_bench(
    scenario_path: &Path,
    speeds: Option<&[f64]>,
    counts: Option<&[usize]>,
    trials: Option<usize>,
    jobs: usize,
    out: Option<&Path>,
    ideal_replan: bool,
) -> Result<String, CliError> {
    let scenario = load_scenario(scenario_path)?;
    let csv = bench::bench_csv(&scenario, speeds, counts, trials, jobs, ideal_replan)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(path) = out {
        std::fs::write(path, &csv)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(csv)
}

/// `snapshot`: render one tick of a trace as a standalone SVG.
pub fn cmd_snapshot(trace_path: &Path, tick: usize, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(trace_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", trace_path.display()))
    })?;
    let trace = trace::Trace::parse(&text).map_err(CliError::Config)?;
    let scene = trace.scene_at(tick).map_err(CliError::Config)?;
    let svg = svg::render(&scene);
    std::fs::write(out, svg)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}
