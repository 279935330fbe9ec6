//! `wqlab` — batch driver for random-quantization experiments.
//!
//! Reads a JSON config (or a previous run's manifest), runs the requested
//! subcommand over its experiments with fully seeded randomness, and
//! writes CSV artifacts plus a manifest. Exit codes: 0 on success (bound
//! reports may still contain UNSATISFIED rows — they report, they don't
//! fail), 2 on configuration errors, 3 on solver capacity errors, 1 on
//! any other runtime failure.

mod config;
mod runner;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::load_config;
use runner::{run, RunContext};

/// Errors surfaced to the user, partitioned by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration: exit 2.
    Config(String),
    /// A solver refused the problem size: exit 3.
    Capacity(String),
    /// Everything else: exit 1.
    Run(String),
}

impl From<wqlab::Error> for CliError {
    fn from(e: wqlab::Error) -> Self {
        if e.is_capacity() {
            CliError::Capacity(e.to_string())
        } else {
            CliError::Run(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Run(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Capacity(m) | CliError::Run(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "wqlab",
    version,
    about = "Random quantization of probability measures: seeded Monte Carlo \
             suites, exact transport distances, rate fits, and bound reports"
)]
struct Cli {
    /// JSON experiment config, or the manifest of a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory the CSV artifacts and manifest are written to.
    #[arg(long, global = true, default_value = "wqlab-out")]
    out: PathBuf,
    /// Worker threads (overrides the config and WQLAB_WORKERS; outputs
    /// never depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run only the experiment with this id.
    #[arg(long, global = true)]
    experiment: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Exact transport distance between two inline discrete measures.
    Exact,
    /// Monte Carlo suite estimating the random quantization error.
    Simulate,
    /// Log-log rate fit over a Monte Carlo suite.
    Rate,
    /// Rescaled-error trace N^(1/d)·V_hat watching the limiting constant.
    Kappa,
    /// Certified brackets vs. the moment-based bound.
    PierceCheck,
    /// Certified brackets vs. the uniform-cube bound.
    CubeCheck,
    /// Point estimates vs. the calibrated high-resolution bound (advisory).
    HrCheck,
    /// One-shot multiscale transport upper bound for a sampled instance.
    Dyadic,
    /// Lloyd-type optimal quantizer baseline.
    QuantizeOpt,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Simulate => "simulate",
            Command::Rate => "rate",
            Command::Kappa => "kappa",
            Command::PierceCheck => "pierce-check",
            Command::CubeCheck => "cube-check",
            Command::HrCheck => "hr-check",
            Command::Dyadic => "dyadic",
            Command::QuantizeOpt => "quantize-opt",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut config = load_config(config_path)?;

    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(id) = &cli.experiment {
        config.experiments.retain(|e| &e.id == id);
        if config.experiments.is_empty() {
            return Err(CliError::Config(format!(
                "no experiment named `{id}` in {}",
                config_path.display()
            )));
        }
    }

    let workers = resolve_workers(cli.workers, config.workers)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Run(format!("cannot build worker pool: {e}")))?;

    let ctx = RunContext {
        command: cli.command.name().to_string(),
        config,
        out_dir: cli.out,
    };
    pool.install(|| run(&ctx))
}

/// Worker-count resolution: flag, then config, then WQLAB_WORKERS.
fn resolve_workers(
    flag: Option<usize>,
    configured: Option<usize>,
) -> Result<Option<usize>, CliError> {
    let from_env = || -> Result<Option<usize>, CliError> {
        match std::env::var("WQLAB_WORKERS") {
            Ok(raw) => raw
                .parse::<usize>()
                .map(Some)
                .map_err(|_| {
                    CliError::Config(format!(
                        "WQLAB_WORKERS must be an unsigned integer, got `{raw}`"
                    ))
                }),
            Err(_) => Ok(None),
        }
    };
    let chosen = match flag.or(configured) {
        Some(w) => Some(w),
        None => from_env()?,
    };
    if chosen == Some(0) {
        return Err(CliError::Config("worker count must be at least 1".into()));
    }
    Ok(chosen)
}
