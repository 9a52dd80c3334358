//! Command-line harness around `atvkit`: compute, verify, oracle-check and
//! ratio-scan.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod evaluate;
pub mod tolerance;

pub use args::{Cli, Command};
pub use commands::{IoFailure, Outcome};
pub use tolerance::Tolerances;

/// Runs one parsed command.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let tol = Tolerances::from_env()?;
    match &cli.command {
        Command::Compute(a) => commands::compute(a, tol),
        Command::Verify(a) => commands::verify(a, tol),
        Command::OracleCheck(a) => commands::oracle_check(a, tol),
        Command::RatioScan(a) => commands::ratio_scan(a),
    }
}
