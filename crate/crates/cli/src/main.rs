//! Planner CLI: estimate rotary-angle distributions, score extension
//! strategies, emit scaling plans, sweep parameters, and verify the
//! relative-position identity.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
//! 3 verification failure.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::Parser;

use crate::config::{Cli, Command};

/// Command-level failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<ropeplan::Error> for CliError {
    fn from(e: ropeplan::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let result = match cli.command {
        Command::Estimate(args) => commands::estimate(args),
        Command::Disturbance(args) => commands::disturbance(args),
        Command::Plan(args) => commands::plan(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Verify(args) => commands::verify(args),
    };

    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
