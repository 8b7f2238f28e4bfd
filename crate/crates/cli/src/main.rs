//! Batch front end: reads a JSON config, runs one command, writes CSV/JSON
//! artifacts.
//!
//! Exit status is 0 on success, 1 when the computation fails or a check does
//! not hold, 2 when the configuration is unusable.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{Command, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "defire",
    version,
    about = "Event-driven simulator for coupled degrade-and-fire oscillators"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, short)]
    verbose: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DEFIRE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "DEFIRE_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let config = RunConfig::load(&cli.config, cli.command)?;
    commands::run(&config, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
