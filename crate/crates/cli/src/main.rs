//! `mai`: homology and persistence utilities plus the memory-amortized inference
//! experiment driver.
//!
//! Exit codes: 0 success, 1 a hypothesis check failed, 2 bad configuration or input,
//! 3 runtime error.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{PersistenceArgs, Status};
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "mai", version, about = "Memory-amortized inference over persistent cycles")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for `persistence`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Library snapshot to load before and save after the run.
    #[arg(long, global = true)]
    library: Option<PathBuf>,
    /// Persistence threshold for admitting cycles (overrides the config).
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Betti numbers of a complex given as chains, one `k: v0 v1 ; ...` per line.
    Homology { complex: PathBuf },
    /// Vietoris–Rips barcode of a CSV point cloud.
    Persistence {
        points: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        max_scale: f64,
        /// Top simplex dimension; homology is reported below it.
        #[arg(long, default_value_t = 2)]
        max_dim: usize,
        /// Append each bar's representative chain.
        #[arg(long)]
        representatives: bool,
    },
    /// Generate (or read) one episode, save it and run it through the engine.
    Episode {
        /// Episode CSV with its `.json` header alongside.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Stream position of the generated episode.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Run the episode stream and the configured hypothesis checks.
    Experiment,
    /// Run baseline and ablated arms (A1..A5) and compare.
    Ablate { id: String },
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        tau: cli.tau,
        out: cli.out.clone(),
        library: cli.library.clone(),
    };
    let load = || RunConfig::load(cli.config.as_deref(), &overrides);
    match &cli.command {
        Command::Homology { complex } => commands::homology(complex),
        Command::Persistence {
            points,
            max_scale,
            max_dim,
            representatives,
        } => commands::persistence(PersistenceArgs {
            points,
            max_scale: *max_scale,
            max_dim: *max_dim,
            representatives: *representatives,
            out: cli.out.as_deref(),
        }),
        Command::Episode { input, index } => commands::episode(&load()?, input.as_deref(), *index),
        Command::Experiment => commands::experiment(&load()?),
        Command::Ablate { id } => {
            let ab = id.parse().map_err(CliError::from)?;
            commands::ablate(&load()?, ab)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::HypothesisFail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("mai: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
