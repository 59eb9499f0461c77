//! `leafsim`: configuration-driven experiments on singular holomorphic foliations.

mod commands;
mod context;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use context::Context;

#[derive(Debug, Parser)]
#[command(name = "leafsim", version, about = "Leafwise Brownian motion and holonomy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Overrides the horizon; experiments with a horizon list run at this horizon only.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refine and classify the singular points.
    Singularities,
    /// Ensemble Lyapunov exponents of the normal bundles.
    Lyapunov,
    /// Holonomy contraction of transverse offsets.
    Contraction,
    /// Occupation measures, and near-plane fractions on threefolds.
    Occupation,
    /// Occupation and transition similarity of nearby starts.
    Similarity,
    /// Displacement tail of the reference hyperbolic sampler.
    HeatTail,
    /// Property suites; exits nonzero on any failure.
    Validate,
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut ctx = Context::new(&cli.common)?;
    let horizon = cli.common.horizon.is_some();
    match cli.command {
        Command::Singularities => commands::singularities(&ctx)?,
        Command::Lyapunov => commands::lyapunov(&ctx)?,
        Command::Contraction => commands::contraction(&ctx)?,
        Command::Occupation => commands::occupation(&ctx, horizon)?,
        Command::Similarity => commands::similarity(&ctx, horizon)?,
        Command::HeatTail => commands::heat(&mut ctx)?,
        Command::Validate => return commands::run_validate(&ctx),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
