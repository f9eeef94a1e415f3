mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

/// Profile, train, run and evaluate the combined proactive/reactive auto-scaler
/// on a simulated publish/subscribe service.
#[derive(Debug, Parser)]
#[command(name = "flas", version)]
struct Cli {
    /// Configuration file (flat `key = value` with `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[run] out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Add unrounded RT columns to traces.
    #[arg(long, global = true)]
    full_precision: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the profiling workload and write the training sets.
    Profile,
    /// Fit the predictors from training sets.
    Train {
        /// Directory holding the training CSVs; defaults to the output directory.
        #[arg(long)]
        training: Option<PathBuf>,
    },
    /// Run one scenario with one auto-scaler variant.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        variant: String,
        /// Directory with model files from `train`; profiles and trains when absent.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Evaluate every trace in a directory.
    Evaluate {
        /// Directory holding traces from `run`; defaults to the output directory.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Run every configured scenario, variant and seed and tabulate the means.
    Compare,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    match &cli.command {
        Command::Profile => commands::profile(&cfg),
        Command::Train { training } => commands::train(&cfg, training.as_deref().unwrap_or(&cfg.out)),
        Command::Run { scenario, variant, models } => {
            commands::run(&cfg, scenario, variant, models.as_deref(), cli.full_precision)
        }
        Command::Evaluate { traces } => commands::evaluate(&cfg, traces.as_deref().unwrap_or(&cfg.out)),
        Command::Compare => commands::compare(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flas: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
