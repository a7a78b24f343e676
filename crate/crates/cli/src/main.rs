use clap::{Parser, Subcommand};
use smart_cli::{cmd_bench, cmd_run, cmd_snapshot};
use std::path::PathBuf;
use std::process::ExitCode;

/// Replanning engine for a robot among moving obstacles.
#[derive(Parser)]
#[command(name = "smart", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a single trial of a scenario.
    Run {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a replay trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Charge zero simulated time per replanning episode.
        #[arg(long)]
        ideal_replan: bool,
    },
    /// Sweep obstacle speeds and counts, writing a CSV report.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated obstacle speeds (one benchmark row each).
        #[arg(long, value_delimiter = ',')]
        speeds: Option<Vec<f64>>,
        /// Comma-separated obstacle counts.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        /// Trials per grid cell (defaults to the scenario's trial count).
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; the CSV does not depend on this.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the CSV here (also printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        ideal_replan: bool,
    },
    /// Render one tick of a replay trace as SVG.
    Snapshot {
        #[arg(long)]
        trace: PathBuf,
        /// Tick index within the trace.
        #[arg(long)]
        tick: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMART_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Commands::Run {
            scenario,
            seed,
            trace,
            ideal_replan,
        } => cmd_run(&scenario, seed, trace.as_deref(), ideal_replan).map(Some),
        Commands::Bench {
            scenario,
            speeds,
            counts,
            trials,
            jobs,
            out,
            ideal_replan,
        } => cmd_bench(
            &scenario,
            speeds.as_deref(),
            counts.as_deref(),
            trials,
            jobs,
            out.as_deref(),
            ideal_replan,
        )
        .map(Some),
        Commands::Snapshot { trace, tick, out } => cmd_snapshot(&trace, tick, &out).map(|()| None),
    };
    match outcome {
        Ok(Some(text)) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
