//! Command-line experiment drivers.
//!
//! Exit codes: 0 on success, 2 on configuration/input errors, 3 on numerical
//! failures.

mod config;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "asdec", about = "Adaptive spectral decomposition experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error decay over mesh levels at fixed epsilon.
    ConvergenceDelta(RunArgs),
    /// Error decay over the epsilon list at a fixed mesh level.
    ConvergenceEps(RunArgs),
    /// Export the lifting, eigenfunctions and eigenvalues.
    Decompose(RunArgs),
    /// Deconvolution study: ASI, TSVD and a direct solve.
    Invert(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides out_dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&RunArgs, fn(&ExperimentConfig, &config::LoadedMedium, &std::path::Path) -> anyhow::Result<()>) =
        match &cli.command {
            Command::ConvergenceDelta(a) => (a, runs::run_convergence_delta),
            Command::ConvergenceEps(a) => (a, runs::run_convergence_eps),
            Command::Decompose(a) => (a, runs::run_decompose),
            Command::Invert(a) => (a, runs::run_invert),
        };

    match execute(args, run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

fn execute(
    args: &RunArgs,
    run: fn(&ExperimentConfig, &config::LoadedMedium, &std::path::Path) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let config_dir = args
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let medium = cfg.load_medium(&config_dir)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    run(&cfg, &medium, &out)
}

/// 2 for configuration and input problems, 3 for numerical failures.
fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<asdec::Error>() {
            return match err {
                asdec::Error::InvalidInput(_)
                | asdec::Error::Parse { .. }
                | asdec::Error::DomainMismatch(_)
                | asdec::Error::Capacity(_) => 2,
                asdec::Error::NoConvergence { .. }
                | asdec::Error::DegenerateBasis(_)
                | asdec::Error::Singular(_) => 3,
                asdec::Error::Io(_) => 2,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 2;
        }
    }
    // config validation bail!s and other setup failures
    if format!("{e:#}").contains("numerical") {
        3
    } else {
        2
    }
}
