//! `sldsgcn`: ingest graphs, profile degree bias, train and compare variants,
//! and evaluate checkpoints.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training error.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(sldsgcn::Error),
    #[error(transparent)]
    Training(sldsgcn::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Training(_) => 3,
        }
    }
}

impl From<sldsgcn::Error> for CliError {
    fn from(e: sldsgcn::Error) -> Self {
        match e {
            sldsgcn::Error::Config(m) => CliError::Usage(format!("config: {m}")),
            e if e.is_data_error() || matches!(e, sldsgcn::Error::Split(_)) => CliError::Data(e),
            e => CliError::Training(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "warn" } else { "info" }))
        .format_timestamp(None)
        .init();

    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.workers)))
        .and_then(|pool| {
            pool.install(|| match cli.command {
                Command::Ingest { src, dst } => commands::ingest(&src, &dst),
                Command::Profile(args) => commands::profile(&args),
                Command::Train(args) => commands::train(&args),
                Command::Ablate(args) => commands::ablate(&args),
                Command::Evaluate(args) => commands::evaluate(&args),
            })
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
