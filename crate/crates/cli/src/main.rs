//! `pmf`: shape correspondence from the command line.

mod commands;
mod manifest;
mod spaces;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pmf_core::Error;

#[derive(Parser, Debug)]
#[command(name = "pmf", version, about = "Bijective shape correspondence with the product manifold filter")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Farthest-point sampling hierarchy of a space.
    Fps(commands::FpsArgs),
    /// Dense bijective correspondence from input matches.
    Match(commands::MatchArgs),
    /// Geodesic errors of a map against ground truth.
    Eval(commands::EvalArgs),
    /// Subsample a space to a given point count.
    Resample(commands::ResampleArgs),
    /// Color a target mesh through a map.
    Transfer(commands::TransferArgs),
}

/// Failure tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub error: Error,
}

pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for pmf_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

pub fn usage(stage: &'static str, msg: impl Into<String>) -> Failure {
    Failure {
        stage,
        error: Error::InvalidArgument(msg.into()),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Io { .. } => 2,
        Error::Parse { .. } | Error::Validation(_) | Error::SizeCap { .. } => 3,
        Error::Infeasible(_) => 4,
        Error::NotConverged { .. } | Error::Internal(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads(cli.threads) {
        return report(f);
    }
    let outcome = match cli.command {
        Command::Fps(a) => commands::fps(a),
        Command::Match(a) => commands::run_match(a, cli.threads),
        Command::Eval(a) => commands::eval(a),
        Command::Resample(a) => commands::resample(a),
        Command::Transfer(a) => commands::transfer(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("error [{}]: {}", f.stage, f.error);
    ExitCode::from(exit_code(&f.error))
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("threads", "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure {
                stage: "threads",
                error: Error::Internal(e.to_string()),
            })?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    if threads == Some(0) {
        return Err(usage("threads", "--threads must be at least 1"));
    }
    Ok(())
}
