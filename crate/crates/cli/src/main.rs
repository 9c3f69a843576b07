//! `stc`: command-line front end for the space-time coding simulator.
//!
//! Exit status is 0 on success, 2 on usage or configuration errors and 1 on
//! internal failures such as unwritable outputs.

mod commands;
mod manifest;
mod schedule;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(summary) => {
            if let Some(line) = summary {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Internal(_) => ExitCode::from(1),
            }
        }
    }
}
