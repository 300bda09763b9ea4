//! `mixfrac`: simulate panels, estimate the mixed fractional model, fit the
//! effects CDF, and run Monte Carlo experiments.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mixfrac::noise::Backend;

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Cholesky,
    Circulant,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Cholesky => Backend::Cholesky,
            BackendArg::Circulant => Backend::Circulant,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mixfrac", version, about = "Mixed fractional Black-Scholes model with random effects")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fractional noise synthesis.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a panel; writes panel.csv and truth.json.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        subjects: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        observations: Option<i64>,
    },
    /// Estimate (H, gamma^2, sigma^2) and the effects; writes estimate.json.
    Estimate {
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Increments per subject used by the statistics.
        #[arg(long, allow_negative_numbers = true)]
        observations: Option<i64>,
    },
    /// Fit the Lagrange and kernel CDF estimators; writes curve.csv and fit.json.
    FitCdf {
        /// estimate.json from a previous `estimate` run.
        #[arg(long, conflicts_with = "panel")]
        estimate: Option<PathBuf>,
        /// Estimate inline from this panel instead.
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Fixed interpolation order instead of cross-validation.
        #[arg(long, allow_negative_numbers = true)]
        m: Option<i64>,
    },
    /// Replicated Monte Carlo runs; writes report JSONs and table CSVs.
    Experiment {
        #[arg(long, allow_negative_numbers = true)]
        subjects: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        observations: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        replications: Option<i64>,
        /// Record wall-clock runtime in the reports.
        #[arg(long)]
        timing: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut flags = Overrides {
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
        backend: cli.backend.map(Backend::from),
        ..Default::default()
    };
    match &cli.command {
        Command::Simulate { subjects, observations } => {
            flags.subjects = *subjects;
            flags.observations = *observations;
        }
        Command::Estimate { panel, observations } => {
            flags.panel = panel.clone();
            flags.observations = *observations;
        }
        Command::FitCdf { estimate, panel, m } => {
            flags.estimate = estimate.clone();
            flags.panel = panel.clone();
            flags.m = *m;
        }
        Command::Experiment {
            subjects,
            observations,
            replications,
            ..
        } => {
            flags.subjects = *subjects;
            flags.observations = *observations;
            flags.replications = *replications;
        }
    }
    let cfg = RunConfig::load(cli.config.as_deref(), std::env::vars(), &flags)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Estimate { .. } => commands::estimate(&cfg),
        Command::FitCdf { .. } => commands::fit_cdf(&cfg),
        Command::Experiment { timing, .. } => commands::experiment(&cfg, timing),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
