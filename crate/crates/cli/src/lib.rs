//! Batch front end for the `rarma` library: argument handling, matrix file
//! formats and the subcommand implementations.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use args::{Cli, Command};
use config::FileConfig;
use error::{CliError, CliResult};

/// Sizes the global rayon pool from `RARMA_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("RARMA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("RARMA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &cfg),
        Command::Fit(a) => commands::fit(a, &cfg),
        Command::Detect(a) => commands::detect(a, &cfg),
        Command::Montecarlo(a) => commands::montecarlo(a, &cfg),
        Command::Residuals(a) => commands::residuals(a, &cfg),
    }
}
