//! `bgc`: command-line front end for bgc-core.
//!
//! Exit status: 0 success, 2 usage error, 3 failed precondition or I/O,
//! 4 analysis failure (e.g. an unidentifiable barrier fit).

mod args;
mod commands;

use std::process::ExitCode;

use bgc_core::ErrorCategory;
use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Precondition(String),
    Analysis(String),
}

impl CliError {
    /// Wraps a library error, prefixing the parameter or artifact involved.
    pub fn core(err: bgc_core::Error, context: &str) -> Self {
        let msg = format!("{context}: {err}");
        match err.category() {
            ErrorCategory::Analysis => CliError::Analysis(msg),
            ErrorCategory::Precondition | ErrorCategory::Io => CliError::Precondition(msg),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Precondition(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Precondition(m) | CliError::Analysis(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::SimulateOup(a) => commands::simulate_oup_cmd(a),
        Command::FitBarrier(a) => commands::fit_barrier_cmd(a),
        Command::DetectBands(a) => commands::detect_bands_cmd(a),
        Command::Compare(a) => commands::compare(a),
        Command::ExportField(a) => commands::export_field(a),
        Command::ClassifyPsi(a) => commands::classify_psi(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
