//! `sparse-iqa`: train a sparse decoder, score image pairs, evaluate scores
//! against subjective data, and export learned filters.
//!
//! Exit codes: 0 success, 1 some items failed, 2 usage or configuration
//! error, 3 internal error.

mod cli;
mod config;
mod evaluate;
mod score;
mod train;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};
use crate::config::RunConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<sparse_iqa::Error> for CliError {
    fn from(err: sparse_iqa::Error) -> Self {
        use sparse_iqa::Error as E;
        let usage = match &err {
            E::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            E::InvalidParameter(_)
            | E::Model(_)
            | E::UnmatchedIds(_)
            | E::DuplicateId(_)
            | E::Csv(_)
            | E::ChannelCount { .. }
            | E::ImageTooSmall { .. }
            | E::DimensionMismatch { .. }
            | E::Image(_) => true,
            _ => false,
        };
        Self { code: if usage { 2 } else { 3 }, message: err.to_string() }
    }
}

/// Subcommands return whether any individual item failed.
pub type Outcome = Result<bool, CliError>;

fn run(cli: Cli) -> Outcome {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    let jobs = config.jobs;
    let work = move || match cli.command {
        Command::Train(args) => train::run(args, config),
        Command::Score(args) => score::run(args, config),
        Command::Evaluate(args) => evaluate::run(args, config),
        Command::ExportFilters(args) => train::export_filters(args),
    };
    with_jobs(jobs, work)
}

#[cfg(feature = "parallel")]
fn with_jobs<F: FnOnce() -> Outcome + Send>(jobs: Option<usize>, f: F) -> Outcome {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::internal(e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<F: FnOnce() -> Outcome>(_jobs: Option<usize>, f: F) -> Outcome {
    f()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
