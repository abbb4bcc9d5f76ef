use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<entmon::Error> for CliError {
    fn from(e: entmon::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

/// Simulate two continuously monitored qubits and track their entanglement.
#[derive(Debug, Parser)]
#[command(name = "entmon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration file ([model], [run], [output], [sweep]).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Root seed; overrides run.seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write every trajectory to trajectories/traj_NNNNN.csv.
    #[arg(long)]
    traj_dump: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ensemble estimates of the requested observables (estimates.csv).
    Simulate(Common),
    /// A priori evolution and entanglement death time (master.csv, summary.json).
    Master(Common),
    /// Closed-form curves of the preset on the run grid (oracle.csv).
    Oracle(Common),
    /// One ensemble per value of the [sweep] parameter (sweep_NNN.csv).
    Sweep(Common),
    /// Write the preset's model as a model file (model.toml).
    ExportModel(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, fn(&RunConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Master(c) => (c, commands::master),
        Command::Oracle(c) => (c, commands::oracle),
        Command::Sweep(c) => (c, commands::sweep),
        Command::ExportModel(c) => (c, commands::export_model),
    };
    let overrides = Overrides { seed: common.seed, out: common.out.clone(), traj_dump: common.traj_dump };
    let cfg = RunConfig::load(&common.config, &overrides)?;
    f(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("entmon: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
