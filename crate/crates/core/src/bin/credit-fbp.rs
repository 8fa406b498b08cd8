use std::process::ExitCode;

use clap::Parser;
use credit_fbp::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
