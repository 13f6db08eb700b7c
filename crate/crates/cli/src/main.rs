//! `slgate`: batch front end for the spectral toolkit.
//!
//! Exit codes: 0 success, 1 a check failed, 2 config error, 3 numeric failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "slgate", version, about = "Direct and inverse spectral experiments for -u'' + q u on [0, 1]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    /// JSON experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized probe sets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues and asymptotic residuals.
    Spectrum(CommonArgs),
    /// Certificate values, Lagrange identity and optional Fourier check.
    Certify(CommonArgs),
    /// Counting hypotheses for a sub-spectrum.
    Hypotheses(CommonArgs),
    /// Kernel grid with support, Hölder, contraction and fixed-point checks.
    Kernel(CommonArgs),
    /// Potential and h from eigenvalue data.
    Reconstruct(CommonArgs),
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SLGATE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SLGATE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let (name, args, f): (&'static str, CommonArgs, fn(&Run) -> Result<bool>) = match cli.command {
        Command::Spectrum(a) => ("spectrum", a, commands::spectrum),
        Command::Certify(a) => ("certify", a, commands::certify),
        Command::Hypotheses(a) => ("hypotheses", a, commands::hypotheses),
        Command::Kernel(a) => ("kernel", a, commands::kernel),
        Command::Reconstruct(a) => ("reconstruct", a, commands::reconstruct),
    };
    let config = ExperimentConfig::load(&args.config)?;
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write {
        path: args.out.clone(),
        source,
    })?;
    f(&Run {
        command: name,
        config: &config,
        out_dir: &args.out,
        seed: args.seed,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("slgate: one or more checks failed; see the JSON summary");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("slgate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
