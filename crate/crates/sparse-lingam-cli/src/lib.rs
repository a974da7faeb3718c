//! Command-line interface for sparse linear non-Gaussian causal
//! discovery: dataset simulation, structure estimation, replicated
//! benchmarks, and heatmap rendering.
//!
//! Exit codes: 0 success; 2 input data unusable (parse failures, missing
//! values, constant or collinear columns); 3 invalid parameters; 4 solver
//! failure or non-convergence (fit outputs are still written when the
//! solver merely hit its iteration budget); 5 filesystem errors.

use clap::Parser;
use sparse_lingam::Error;

pub mod args;
pub mod commands;
pub mod io;

/// Maps an error to the documented exit code family.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::MissingData { .. }
        | Error::DegenerateColumn { .. }
        | Error::RankDeficient { .. } => 2,
        Error::Parameter(_) | Error::InsufficientData(_) => 3,
        Error::Singular(_)
        | Error::Divergence(_)
        | Error::DegenerateRow { .. }
        | Error::Rescale { .. }
        | Error::Selection(_) => 4,
        Error::Io(_) => 5,
    }
}

/// Parses the process arguments, runs the chosen command, and returns the
/// process exit code.
pub fn run() -> i32 {
    let cli = args::Cli::parse();
    let outcome = match &cli.command {
        args::Command::Simulate(a) => commands::cmd_simulate(a),
        args::Command::Fit(a) => commands::cmd_fit(a),
        args::Command::Benchmark(a) => commands::cmd_benchmark(a),
        args::Command::Heatmap(a) => commands::cmd_heatmap(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
