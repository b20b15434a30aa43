//! Command-line front end: configuration layering, experiment grids, and
//! artifact files.
//!
//! Exit codes: 0 on success, 1 for runtime failures such as divergence,
//! 2 for usage, configuration, and input errors.

pub mod args;
pub mod commands;
pub mod error;
pub mod heatmap;
pub mod input;

use std::process::ExitCode;

use clap::Parser;

pub use args::Cli;
pub use error::{CliError, Result};

use args::Command;

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Train(a) => commands::train(a, out).map(drop),
        Command::Sweep(a) => commands::sweep(a, out).map(drop),
        Command::Ablate(a) => commands::ablate(a, out).map(drop),
        Command::Heatmap(a) => commands::heatmap(a, out).map(drop),
        Command::NoiseSweep(a) => commands::noise_sweep(a, out).map(drop),
        Command::Synth(a) => commands::synth(a, out).map(drop),
    }
}

/// Parses `std::env::args`, runs the command, and maps errors to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
