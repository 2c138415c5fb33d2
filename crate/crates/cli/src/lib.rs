//! Configuration-driven experiment harness around `csma-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "csma",
    version,
    about = "Mean-field analysis and simulation of CSMA networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `sim.replicas`.
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// List the feasible activity states.
    Enumerate,
    /// Solve for the mean-field equilibrium.
    FixedPoint,
    /// Integrate the mean-field ODE.
    Ode,
    /// Simulate the N-node network.
    Simulate,
    /// Compare simulations over the node ladder with the limit laws.
    Compare,
    /// Sweep one parameter and report fixed points.
    Sweep,
}

/// Applies the command-line overrides to a loaded configuration.
pub fn apply_overrides(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    replicas: Option<usize>,
) -> Result<ExperimentConfig, CliError> {
    if seed.is_some() || replicas.is_some() {
        let sim = cfg
            .sim
            .as_mut()
            .ok_or_else(|| CliError::Config("--seed/--replicas need a [sim] block".into()))?;
        if let Some(s) = seed {
            sim.seed = s;
        }
        if let Some(r) = replicas {
            sim.replicas = r;
        }
    }
    Ok(cfg)
}

/// Runs one subcommand against a validated experiment.
pub fn execute(
    command: Command,
    exp: &Experiment,
    out: Option<PathBuf>,
) -> Result<Value, CliError> {
    let ctx = commands::Context::new(exp, out);
    match command {
        Command::Enumerate => commands::enumerate(exp, &ctx),
        Command::FixedPoint => commands::fixed_point(exp, &ctx),
        Command::Ode => commands::ode(exp, &ctx),
        Command::Simulate => commands::simulate(exp, &ctx),
        Command::Compare => commands::compare(exp, &ctx),
        Command::Sweep => commands::sweep(exp, &ctx),
    }
}

pub fn run(cli: Cli) -> Result<Value, CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = apply_overrides(ExperimentConfig::load(&path)?, cli.seed, cli.replicas)?;
    let exp = cfg.validate()?;
    execute(cli.command, &exp, cli.out)
}
