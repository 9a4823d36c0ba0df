//! `bfcnn`: training runs, phase-length sweeps, single-module simulation,
//! error-bound evaluation and integrator self-checks.
//!
//! Every subcommand takes an optional config file (see [`config`]) and writes
//! CSV files plus a `manifest.txt` under the output root. `BFCNN_OUT`
//! overrides the root given in the config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Flags;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "bfcnn",
    version,
    about = "Phase-clocked chemical neural network experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file; built-in defaults are used when omitted.
    config: Option<PathBuf>,
    /// Keep the full state after every phase (snapshots.csv).
    #[arg(long)]
    trace: bool,
    /// Write the reaction network text next to the results.
    #[arg(long)]
    emit_crn: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train once at phase length `run.t`.
    Train(Common),
    /// Train at every phase length in `run.t_grid` and fit the convergence order.
    Sweep(Common),
    /// Integrate the module named in `[module]` on its own.
    SimulateModule(Common),
    /// Evaluate the iteration error bound and envelope parameters from `[bounds]`.
    Bounds(Common),
    /// Compare the integrator against closed-form solutions.
    OracleCheck(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&RunConfig, Flags) -> anyhow::Result<()>) = match &cli.command {
        Command::Train(c) => (c, commands::train),
        Command::Sweep(c) => (c, commands::sweep),
        Command::SimulateModule(c) => (c, commands::simulate_module),
        Command::Bounds(c) => (c, |cfg, _| commands::bounds(cfg)),
        Command::OracleCheck(c) => (c, |cfg, _| commands::oracle_check(cfg)),
    };
    let flags = Flags {
        trace: common.trace,
        emit_crn: common.emit_crn,
    };
    let result = RunConfig::load(common.config.as_deref()).and_then(|cfg| run(&cfg, flags));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
