//! `merit`: fit, forecast, select and evaluate merit-order models from the
//! command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::LoadedConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "merit", version, about = "Data-driven merit-order electricity price model")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for fitting, selection and synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Objective evaluations per fit.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the configured parameter groups on the training period.
    Fit,
    /// Price the test period with a fitted parameter file.
    Forecast {
        /// Parameter file; `<out>/theta.json` by default.
        #[arg(long)]
        theta: Option<PathBuf>,
    },
    /// Greedy forward selection over the configured groups.
    Select,
    /// Error metrics and correlations of forecast run files.
    Evaluate {
        /// Run CSVs; each model is named after its file stem.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Require a run named `naive` and report skill against it.
        #[arg(long)]
        skill: bool,
    },
    /// Generate a synthetic market with a matching config.
    Synth,
    /// Run the naive, expert, hydro and net-import benchmarks over the test period.
    Benchmarks,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = LoadedConfig::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        cfg.config.seed = Some(seed);
    }
    if let Some(budget) = cli.common.budget {
        cfg.config.optimizer.budget = budget;
    }
    if let Some(out) = cli.common.out {
        cfg.config.out = std::path::absolute(&out).map_err(|e| CliError::Config(format!("--out: {e}")))?;
    }
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Fit => commands::fit_cmd(&cfg),
        Command::Forecast { theta } => commands::forecast_cmd(&cfg, theta.as_deref()),
        Command::Select => commands::select_cmd(&cfg),
        Command::Evaluate { runs, skill } => commands::evaluate_cmd(&cfg, &runs, skill),
        Command::Synth => commands::synth_cmd(&cfg),
        Command::Benchmarks => commands::benchmarks_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
