//! Command-line driver: synthetic data, clustering, toy training, ablations
//! and evaluation, with manifests that make every run replayable.

pub mod args;
pub mod commands;
pub mod error;
pub mod format;
pub mod manifest;

use clap::Parser;

pub use error::{CliError, Result};

/// Sizes the global rayon pool from `HYPERGCD_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HYPERGCD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HYPERGCD_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Parses `argv` and runs the command. Usage errors exit through clap.
pub fn run(argv: Vec<String>) -> Result<()> {
    let cli = args::Cli::parse_from(&argv);
    configure_threads()?;
    commands::execute(&cli.command, &argv)
}
