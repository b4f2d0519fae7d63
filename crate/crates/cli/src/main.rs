//! `shortck` — basin classification, potentials, Julia coupling, dimension
//! estimates and perturbation certificates, driven by one config file.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "shortck",
    about = "Non-autonomous basin toolkit",
    long_about = "Runs one command described by a config file (see the README \
                  for the format). The command, output directory, seed and \
                  thread count live in the [run] section."
)]
struct Args {
    /// Path to the run-configuration file.
    config: std::path::PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("usage error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    match commands::run(&text) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Domain(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
