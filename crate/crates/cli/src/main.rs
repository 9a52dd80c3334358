use std::process::ExitCode;

use atvkit_cli::{run, Cli, IoFailure, Outcome};
use clap::Parser;

// 0 clean, 1 violation or disagreement, 2 bad input, 3 I/O failure
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<IoFailure>()) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
