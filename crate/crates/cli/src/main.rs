//! Command-line driver: load a TOML run configuration, apply command-line
//! overrides, dispatch a subcommand and write traces and reports.
//!
//! Exit codes: 0 pass, 1 a quantitative bound or assertion failed,
//! 2 usage or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{Outcome, OutputWriter};
use config::RunConfig;

/// Environment variable overriding the output directory.
const OUT_DIR_ENV: &str = "SLOWSHADOW_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "slowshadow",
    version,
    about = "Steer slow Hamiltonian dynamics along prescribed curves by symbol-code synthesis"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override (also via SLOWSHADOW_OUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<String>,
    /// Slow parameter ε override.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Fast-coupling strength η override.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Fast-state scale r override.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Contraction factor λ override.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Example-preset μ override.
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Waypoint spacing constant L override.
    #[arg(long, global = true)]
    l: Option<f64>,
    /// Planner horizon (number of waypoints) override.
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Grid resolution override for spanning checks.
    #[arg(long, global = true)]
    grid_resolution: Option<usize>,
    /// Trials-per-experiment override.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify the positive-spanning condition on a domain grid.
    CheckA3,
    /// Shadow the configured curve; write trajectory CSV and summary JSON.
    Shadow,
    /// Run bound-verification experiments and write their reports.
    Verify {
        /// Comma-separated experiment names (uniform-closeness,
        /// same-code-drift, shadow-error, epsilon-sweep).
        #[arg(long, value_delimiter = ',')]
        experiments: Option<Vec<String>>,
    },
    /// ε-scaling sweep of the shadowing error.
    Sweep {
        /// Comma-separated decreasing ε values.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Print and record the constants of the configured model.
    Constants,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        config.output_dir = dir;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(epsilon) = cli.epsilon {
        config.model.epsilon = epsilon;
    }
    if let Some(eta) = cli.eta {
        config.model.eta = eta;
    }
    if let Some(r) = cli.r {
        config.model.r = r;
    }
    if let Some(lambda) = cli.lambda {
        config.model.lambda = lambda;
    }
    if let Some(mu) = cli.mu {
        config.fields.mu = mu;
    }
    if let Some(l) = cli.l {
        config.planner.l = l;
    }
    if let Some(k_max) = cli.k_max {
        config.planner.k_max = k_max;
    }
    if let Some(resolution) = cli.grid_resolution {
        config.planner.grid_resolution = resolution;
    }
    if let Some(trials) = cli.trials {
        config.verify.trials = trials;
    }
    match &cli.command {
        Command::Verify {
            experiments: Some(list),
        } => config.verify.experiments = list.clone(),
        Command::Sweep {
            epsilons: Some(list),
        } => config.sweep.epsilons = list.clone(),
        _ => {}
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let config = resolve_config(cli)?;
    let command_name = match &cli.command {
        Command::CheckA3 => "check-a3",
        Command::Shadow => "shadow",
        Command::Verify { .. } => "verify",
        Command::Sweep { .. } => "sweep",
        Command::Constants => "constants",
    };
    let out = OutputWriter::create(&config.output_dir, command_name, config.seed)?;
    match &cli.command {
        Command::CheckA3 => commands::cmd_check_a3(&config, &out),
        Command::Shadow => commands::cmd_shadow(&config, &out),
        Command::Verify { .. } => commands::cmd_verify(&config, &out),
        Command::Sweep { .. } => commands::cmd_sweep(&config, &out),
        Command::Constants => commands::cmd_constants(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
