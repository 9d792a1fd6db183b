use std::process::ExitCode;

use clap::Parser;

mod experiment;
mod report;

use experiment::Cli;

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors by itself.
    let cli = Cli::parse();
    match experiment::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(experiment::CliFailure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(experiment::CliFailure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
