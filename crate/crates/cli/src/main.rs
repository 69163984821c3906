use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grasmle_cli::commands::{
    cmd_bound, cmd_check, cmd_critical, cmd_fit, cmd_sample, BoundArgs, CheckArgs, CriticalArgs, FitArgs, SampleArgs,
};
use grasmle_cli::error::{exit_code, Outcome};
use grasmle_cli::experiment::{cmd_experiment, ExperimentArgs};

/// Maximum likelihood estimation for the Grassmannian (matrix angular Gaussian) model.
#[derive(Debug, Parser)]
#[command(name = "grasmle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample of subspaces.
    Sample(SampleArgs),
    /// Fit the parameter to a sample.
    Fit(FitArgs),
    /// Decide whether a sample has a unique estimate.
    Check(CheckArgs),
    /// Print the sample-size bound m²/(r(m−r)) and optionally B(m, r).
    Bound(BoundArgs),
    /// Run a simulation study from a configuration file.
    Experiment(ExperimentArgs),
    /// Estimate how often random samples of a given size have a unique estimate.
    McCritical(CriticalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Check(a) => cmd_check(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::McCritical(a) => cmd_critical(a),
    };
    let code = match result {
        Ok(outcome) => {
            if let Outcome::Failure(message) = &outcome {
                eprintln!("grasmle: {message}");
            }
            outcome.exit_code()
        }
        Err(err) => {
            eprintln!("grasmle: {err:#}");
            exit_code(&err)
        }
    };
    ExitCode::from(code as u8)
}
