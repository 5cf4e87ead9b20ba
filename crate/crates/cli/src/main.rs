use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match hyperfit_cli::run(hyperfit_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
