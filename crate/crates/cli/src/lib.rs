//! Front end for `fairtopk-core`: file formats, experiment configs, sweeps,
//! market simulation runs, benchmarks and SVG charts.
//!
//! Every CSV written here is a pure function of the resolved config; wall
//! clock times go to `*.timing.csv` sidecars so reruns are byte identical.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod solve;
pub mod svg;

use args::{Cli, Command};
use error::{exit, CliError};

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Solve(a) => commands::solve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &CliError) {
    eprintln!("error: {e}");
}
