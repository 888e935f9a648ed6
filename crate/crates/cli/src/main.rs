//! `qnull`: seeded experiment drivers and closed-form calculators for the
//! loglikelihood ratio of constrained state tomography.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Parser, Debug)]
#[command(name = "qnull", version, about = "Loglikelihood-ratio null theory experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "QNULL_OUTPUT_DIR", default_value = "qnull-out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the closed-form prediction for <lambda> as JSON.
    Theory(commands::theory::TheoryArgs),
    /// Monte Carlo <lambda> over a grid of (d, r).
    IsotropicSweep(commands::isotropic::SweepArgs),
    /// Per-element <lambda_jk> for one true state.
    LambdaJk(commands::isotropic::LambdaJkArgs),
    /// Heterodyne tomography: datasets, fits, lambda and Fisher tables.
    Heterodyne(commands::heterodyne::HeterodyneArgs),
    /// Mean sorted GUE spectra against semicircle order statistics.
    WignerCheck(commands::checks::WignerArgs),
    /// Fast projections against the Dykstra oracle and the cone identity.
    ProjectionCheck(commands::checks::ProjectionArgs),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let common = &cli.common;
    match cli.command {
        Command::Theory(args) => commands::theory::run(&args),
        Command::IsotropicSweep(args) => commands::isotropic::run_sweep(common, &args),
        Command::LambdaJk(args) => commands::isotropic::run_lambda_jk(common, &args),
        Command::Heterodyne(args) => commands::heterodyne::run(common, &args),
        Command::WignerCheck(args) => commands::checks::run_wigner(common, &args),
        Command::ProjectionCheck(args) => commands::checks::run_projection(common, &args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
