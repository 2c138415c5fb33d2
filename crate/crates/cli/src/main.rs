use std::process::ExitCode;

use clap::Parser;
use csma_cli::{output::canonical_json, run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(doc) => {
            print!("{}", canonical_json(&doc));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
