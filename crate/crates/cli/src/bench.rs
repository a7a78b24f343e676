//! Benchmark grid: (obstacle count, speed) sweeps with trials fanned over a
//! worker pool, aggregated into a schema-stable CSV. Results are collected
//! by trial index, so the output is byte-identical regardless of the worker
//! count.

use anyhow::Context;
use rayon::prelude::*;
use smart_core::sim::{run_trial, Scenario, TrialResult};

pub const CSV_HEADER: &str = "n_obstacles,speed,trials,success_rate,replan_mean_ms,\
replan_median_ms,replan_p25_ms,replan_p75_ms,travel_median_s,travel_p25_s,travel_p75_s";

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n_obstacles: usize,
    pub speed: f64,
    pub trials: usize,
    pub success_rate: f64,
    pub replan_mean_ms: f64,
    pub replan_median_ms: f64,
    pub replan_p25_ms: f64,
    pub replan_p75_ms: f64,
    pub travel_median_s: f64,
    pub travel_p25_s: f64,
    pub travel_p75_s: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation percentile on unsorted data, q in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn summarize(n_obstacles: usize, speed: f64, results: &[TrialResult]) -> BenchRow {
    let successes = results.iter().filter(|r| r.success).count();
    let replans_ms: Vec<f64> = results
        .iter()
        .flat_map(|r| r.replanning_times.iter().map(|s| s * 1e3))
        .collect();
    let travels: Vec<f64> = results.iter().filter_map(|r| r.travel_time).collect();
    BenchRow {
        n_obstacles,
        speed,
        trials: results.len(),
        success_rate: successes as f64 / results.len() as f64,
        replan_mean_ms: mean(&replans_ms),
        replan_median_ms: percentile(&replans_ms, 0.5),
        replan_p25_ms: percentile(&replans_ms, 0.25),
        replan_p75_ms: percentile(&replans_ms, 0.75),
        travel_median_s: percentile(&travels, 0.5),
        travel_p25_s: percentile(&travels, 0.25),
        travel_p75_s: percentile(&travels, 0.75),
    }
}

fn format_row(r: &BenchRow) -> String {
    format!(
        "{},{},{},{:.4},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
        r.n_obstacles,
        r.speed,
        r.trials,
        r.success_rate,
        r.replan_mean_ms,
        r.replan_median_ms,
        r.replan_p25_ms,
        r.replan_p75_ms,
        r.travel_median_s,
        r.travel_p25_s,
        r.travel_p75_s
    )
}

/// Run the benchmark grid and format the CSV report.
///
/// `speeds = None` keeps the scenario's own speed set for a single row.
pub fn bench_csv(
    scenario: &Scenario,
    speeds: Option<&[f64]>,
    counts: Option<&[usize]>,
    trials: Option<usize>,
    jobs: usize,
    ideal_replan: bool,
) -> anyhow::Result<String> {
    let base = &scenario.config;
    let counts: Vec<usize> = counts
        .map(|c| c.to_vec())
        .unwrap_or_else(|| vec![base.obstacle_count]);
    let speed_sets: Vec<Vec<f64>> = match speeds {
        Some(list) => list.iter().map(|s| vec![*s]).collect(),
        None => vec![base.obstacle_speeds.clone()],
    };
    let trials = trials.unwrap_or(base.trials).max(1);

    let mut rows: Vec<Scenario> = Vec::new();
    for &count in &counts {
        for speed_set in &speed_sets {
            let mut config = base.clone();
            config.obstacle_count = count;
            config.obstacle_speeds = speed_set.clone();
            config.trials = trials;
            if ideal_replan {
                config.replan_charge = 0.0;
            }
            if config
                .obstacle_positions
                .as_ref()
                .is_some_and(|p| p.len() != count)
            {
                config.obstacle_positions = None;
                config.obstacle_headings = None;
            }
            rows.push(Scenario {
                config,
                map: scenario.map.clone(),
            });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    let jobs_list: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|row| (0..trials).map(move |trial| (row, trial)))
        .collect();
    let mut results: Vec<(usize, usize, TrialResult)> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(row, trial)| {
                let (result, _) = run_trial(&rows[row], trial);
                (row, trial, result)
            })
            .collect()
    });
    results.sort_by_key(|(row, trial, _)| (*row, *trial));

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for (row_idx, row_scenario) in rows.iter().enumerate() {
        let row_results: Vec<TrialResult> = results
            .iter()
            .filter(|(r, _, _)| *r == row_idx)
            .map(|(_, _, res)| res.clone())
            .collect();
        let speed_label = mean(&row_scenario.config.obstacle_speeds);
        let row = summarize(
            row_scenario.config.obstacle_count,
            speed_label,
            &row_results,
        );
        csv.push_str(&format_row(&row));
        csv.push('\n');
    }
    Ok(csv)
}
