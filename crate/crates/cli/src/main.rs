mod args;
mod calibrate;
mod data;
mod diagnose;
mod estimate;
mod manifest;
mod simulate;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use nsum::NsumError;

use args::{Cli, Command};

/// A command failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn data(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<NsumError> for Failure {
    fn from(e: NsumError) -> Failure {
        Failure::data(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::data(format!("cannot start thread pool: {e}")))?;
    }
    let seed = cli.seed;
    let out = cli.out_dir.as_deref();
    match cli.command {
        Command::Estimate(a) => estimate::run(&a, seed, out),
        Command::Simulate(a) => simulate::simulate(&a, seed, out),
        Command::Calibrate(a) => calibrate::run(&a, seed, out),
        Command::Diagnose(d) => diagnose::run(&d, seed, out),
        Command::Benchmark(a) => simulate::benchmark(&a, seed, out),
        Command::Validate(a) => data::validate(&a, seed, out),
        Command::Summarize(a) => data::summarize(&a, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
