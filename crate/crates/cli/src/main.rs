mod args;
mod commands;
mod ledger;

use std::process::ExitCode;

use clap::Parser;
use veracity_core::Error;

use args::{Cli, Command};

/// 0 success, 1 internal, 2 input file, 3 lookup, 4 parse.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::File { .. } | Error::Config(_) => 2,
        Error::Lookup(_) => 3,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Explain(a) => commands::explain(a),
        Command::Analyze(a) => commands::analyze_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
