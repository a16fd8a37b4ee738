//! `gyrocal`: simulate, train, apply, evaluate and export gyroscope
//! calibration networks.
//!
//! Exit status: 0 success, 2 usage, 3 data, 4 numeric failure.

mod cmd;
mod config;
mod error;
mod inputs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::cmd::{apply, eval, export, simulate, train};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "gyrocal", version, about = "Tiny gyroscope calibration and denoising networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every command accepts.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// `key = value` file with defaults for any long flag of this command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic turntable logs with a truth sidecar.
    Simulate(simulate::SimulateArgs),
    /// Fit the calibration subnet or the denoiser.
    Train(train::TrainArgs),
    /// Run trained weights over a recording.
    Apply(apply::ApplyArgs),
    /// Score an estimate against a truth recording.
    Eval(eval::EvalArgs),
    /// Write the 32-bit deployment container and a parameter-count dump.
    Export(export::ExportArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Train(a) => train::run(a),
        Command::Apply(a) => apply::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Export(a) => export::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gyrocal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
