#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end of the Stokes slip-friction solver: config parsing,
//! experiment drivers and artifact emission.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hvi_core::friction::FrictionError;
use hvi_core::mesh::MeshError;
use hvi_core::rothe::RotheError;
use hvi_core::spectral::SpectralError;
use hvi_core::verify::VerifyError;
use thiserror::Error;

use commands::{EXIT_SOLVER, EXIT_USAGE};
use config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Friction(#[from] FrictionError),
    #[error(transparent)]
    Rothe(#[from] RotheError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Mesh(_) | CliError::Friction(_) => EXIT_USAGE,
            CliError::Rothe(RotheError::UnknownField(_) | RotheError::FieldParameters { .. }) => EXIT_USAGE,
            _ => EXIT_SOLVER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stokes-hvi",
    version,
    about = "Rothe solver and verification studies for Stokes flow with nonmonotone slip friction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace eigenvalue, inf-sup constant and the smallness and step conditions
    Constants(CommonArgs),
    /// Run the time stepping and write the trajectory
    Solve(CommonArgs),
    /// Run a verification study
    Study {
        #[arg(value_enum)]
        kind: StudyKind,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sample the friction law against its certified constants
    ValidateLaw(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration file
    #[arg(long)]
    pub config: PathBuf,
    /// Solve even when the smallness and step conditions both fail
    #[arg(long)]
    pub force: bool,
    /// Output directory (overrides the config's output.dir)
    #[arg(long, env = "STOKES_HVI_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    Convergence,
    Lipschitz,
    Energy,
}

/// Runs one parsed invocation and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let common = match &cli.command {
        Command::Constants(c) | Command::Solve(c) | Command::ValidateLaw(c) => c,
        Command::Study { common, .. } => common,
    };
    let result = RunConfig::load(&common.config).map_err(CliError::from).and_then(|cfg| {
        let out = commands::output_dir(common.out.as_deref(), &cfg);
        let setup = commands::Setup::new(cfg, out)?;
        match cli.command {
            Command::Constants(_) => commands::cmd_constants(&setup),
            Command::Solve(ref c) => commands::cmd_solve(&setup, c.force),
            Command::Study { kind, .. } => commands::cmd_study(&setup, kind),
            Command::ValidateLaw(_) => commands::cmd_validate_law(&setup),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
