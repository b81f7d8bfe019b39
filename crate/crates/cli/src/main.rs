//! `simulate`: scenario-driven front end for the spin-wave decay pipeline.
//!
//! Exit codes: 0 success, 2 usage or scenario-schema error, 3 runtime
//! failure. Fit non-convergence is an analysis outcome, not a tool failure;
//! it exits 0 with `converged: false` recorded in `fit.json`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod pipeline;

use pipeline::CliError;

#[derive(Parser)]
#[command(
    name = "simulate",
    version,
    about = "Spin-wave coherence simulator for thermal vapor cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write curve, fit and manifest artifacts.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override sim.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override sim.n_atoms.
        #[arg(long)]
        atoms: Option<usize>,
    },
    /// Re-run a scenario across values of one scalar field.
    Sweep {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Dotted path of a scalar field, e.g. optics.detection_angle_rad.
        #[arg(long)]
        param: String,
        /// Comma-separated numeric values, one sub-run each.
        #[arg(long)]
        values: String,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override sim.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override sim.n_atoms.
        #[arg(long)]
        atoms: Option<usize>,
    },
}

fn main() -> ExitCode {
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            atoms,
        } => pipeline::run(&scenario, &out, seed, atoms),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            seed,
            atoms,
        } => pipeline::sweep(&scenario, &param, &values, &out, seed, atoms),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// `SPINWAVE_THREADS` caps worker parallelism; unset means machine
/// parallelism. Must run before any rayon use.
fn init_threads() -> Result<(), String> {
    let text = match std::env::var("SPINWAVE_THREADS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("SPINWAVE_THREADS: {e}")),
        Ok(text) => text,
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("SPINWAVE_THREADS: expected a positive integer, got {text:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("SPINWAVE_THREADS: {e}"))
}
