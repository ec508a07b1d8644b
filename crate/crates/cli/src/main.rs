//! `ain-sim`: batch runner for the aligned interference neutralization simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric or capacity error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "ain-sim", version, about = "Aligned interference neutralization experiments")]
struct Cli {
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aligned scheme (and TDMA baseline) over a power grid and channel seeds.
    Simulate(Overrides),
    /// Rational-dimension scheme symbol error trials over a power grid.
    Rational(Overrides),
    /// Two-hop ratio gaps, multihop gain solving, or reduction to two hops.
    Multihop(Overrides),
    /// Phase conditions of a constant complex channel.
    CheckPhases(Overrides),
    /// Write a sampled channel realization as JSON.
    DumpChannel(Overrides),
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<ain_core::Error> for Failure {
    fn from(e: ain_core::Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => config::load_file(path)?,
        None => Overrides::default(),
    };
    let (name, flags) = match cli.command {
        Command::Simulate(o) => ("simulate", o),
        Command::Rational(o) => ("rational", o),
        Command::Multihop(o) => ("multihop", o),
        Command::CheckPhases(o) => ("check-phases", o),
        Command::DumpChannel(o) => ("dump-channel", o),
    };
    let settings = flags.over(file);
    let jobs = settings.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| match name {
        "simulate" => commands::simulate(settings),
        "rational" => commands::rational(settings),
        "multihop" => commands::multihop(settings),
        "check-phases" => commands::check_phases(settings),
        _ => commands::dump_channel(settings),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ain-sim: {f}");
            ExitCode::from(f.code())
        }
    }
}
