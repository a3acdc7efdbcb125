//! Command-line front end for the greedy covariance decomposition.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-invariant
//! violation, 4 acceptance-check failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command};

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("BANACH_KL_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => banach_kl::configure_thread_cap(Some(n)),
            _ => {
                eprintln!("error: BANACH_KL_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose(args) => commands::decompose(args),
        Command::Figure1(args) => commands::figure1(args),
        Command::Sample(args) => commands::sample(args),
        Command::Condition(args) => commands::condition(args),
        Command::DeconditionCheck(args) => commands::decondition_check(args),
        Command::Compare(args) => commands::compare(args),
        Command::OracleCheck(args) => commands::oracle_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
