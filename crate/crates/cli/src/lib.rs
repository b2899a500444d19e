//! Configuration parsing and experiment entry points behind the `qns` binary.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qns", version, about = "Entanglement-swapping network scheduling simulator")]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `engine.master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Reuse cells recorded in `<out>/progress.csv` by an interrupted sweep.
    #[arg(long, global = true)]
    pub resume: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the network and dump its edge list, routes and matrices.
    Topo,
    /// Simulate each configured policy once at the configured loads.
    Run,
    /// Map the stability region of each configured policy.
    Sweep,
    /// Evaluate satellite link rates and memory splits over link traces.
    Satrate,
    /// Solve one dumped integer program and print the solution as JSON.
    Solve {
        /// Instance file in the `# qns-ip v1` dump format.
        instance: PathBuf,
    },
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let load = || {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
        config::ExperimentConfig::load(path)
    };
    let workers_env = std::env::var("QNS_WORKERS").ok();
    let opts = commands::Options {
        seed: cli.seed,
        out: cli.out.clone(),
        resume: cli.resume,
        workers_env,
    };
    match &cli.command {
        Command::Topo => commands::topo(&load()?, &opts),
        Command::Run => commands::run(&load()?, &opts),
        Command::Sweep => commands::sweep(&load()?, &opts),
        Command::Satrate => commands::satrate(&load()?, &opts),
        Command::Solve { instance } => {
            let cfg = cli.config.as_ref().map(|_| load()).transpose()?;
            commands::solve(instance, cfg.as_ref())
        }
    }
}
