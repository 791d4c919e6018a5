//! `szego` — drive truncated Fermi-projection trace experiments from a
//! TOML config: predict coefficients, sweep scales, verify stability,
//! and emit plot data.
//!
//! Exit codes: 0 success, 1 numerical/verification failure, 2 config or
//! usage error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "szego",
    version,
    about = "Trace asymptotics of truncated Fermi projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the predicted volume and boundary coefficients for each
    /// configured test function as JSON.
    Predict {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the scale sweep and write `<experiment>.csv` plus a JSON
    /// sidecar into the configured output directory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the verification battery (stability, operator-norm
    /// identities, convention arbitration) and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit sweep CSVs and emit gnuplot-ready .dat files.
    Plotdata {
        #[arg(long)]
        config: PathBuf,
        /// Sweep CSV(s) to fit; defaults to the sweep this config writes.
        #[arg(long)]
        sweep: Vec<PathBuf>,
    },
    /// Report admissible-class membership of the configured test
    /// functions across dimensions.
    CheckTestfn {
        #[arg(long)]
        config: PathBuf,
        /// Dimensions to check (repeatable).
        #[arg(long, default_values_t = [1u32, 2, 3])]
        dim: Vec<u32>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Predict { config } => commands::cmd_predict(&config),
        Command::Sweep { config } => commands::cmd_sweep(&config),
        Command::Verify { config } => commands::cmd_verify(&config),
        Command::Plotdata { config, sweep } => commands::cmd_plotdata(&config, &sweep),
        Command::CheckTestfn { config, dim } => commands::cmd_check_testfn(&config, &dim),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
