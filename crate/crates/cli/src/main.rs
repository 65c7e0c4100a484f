mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use hlfsr_core::Error;

use args::Cli;

/// Process exit codes, one per failure class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    /// Malformed command line (reported by the argument parser).
    pub const USAGE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const DATASET: u8 = 4;
    pub const CHECKPOINT: u8 = 5;
    pub const IO: u8 = 6;
    pub const NUMERIC: u8 = 7;
}

/// Short machine-readable class and exit code of an error.
fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config(_) => ("config", exit::CONFIG),
        Error::Dataset(_) | Error::Format(_) | Error::Image { .. } => ("dataset", exit::DATASET),
        Error::Checkpoint(_) => ("checkpoint", exit::CHECKPOINT),
        Error::Io { .. } => ("io", exit::IO),
        Error::Numeric(_) => ("numeric", exit::NUMERIC),
        Error::Dimension(_) | Error::Contract(_) | Error::DegenerateFit(_) => ("internal", exit::INTERNAL),
    }
}

const THREADS_VAR: &str = "HLFSR_THREADS";
const MATMUL_THREADS_VAR: &str = "MATMUL_NUM_THREADS";

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    // The matrix-multiply backend reads its thread count on first use.
    if let Ok(n) = std::env::var(THREADS_VAR) {
        match n.trim().parse::<usize>() {
            Ok(n) if n > 0 => std::env::set_var(MATMUL_THREADS_VAR, n.to_string()),
            _ => {
                eprintln!("error[config]: {THREADS_VAR} must be a positive integer, got {n:?}");
                return ExitCode::from(exit::CONFIG);
            }
        }
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            let (kind, code) = classify(&e);
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}
