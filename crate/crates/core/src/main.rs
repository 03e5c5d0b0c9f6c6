use std::process::ExitCode;

use clap::Parser;
use nexfam::cli::{execute, Cli};

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version
    let cli = Cli::parse();
    match execute(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nexfam: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
