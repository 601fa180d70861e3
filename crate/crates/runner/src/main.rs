use std::process::ExitCode;

use chbohm_runner::cli::{execute, Cli};
use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(execute(Cli::parse()))
}
