//! `curveforge`: design, pulse extraction and benchmarking from the shell.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 for numerical failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "curveforge", version, about = "Space-curve design of robust single-qubit gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a gate design; writes design, curve, trace and manifest.
    Design(commands::DesignArgs),
    /// Control pulses of a curve or design.
    Pulse(commands::PulseArgs),
    /// Frenet frame table of a curve or design.
    Frame(commands::FrameArgs),
    /// Infidelity over a grid of quasi-static drive and dephasing errors.
    BenchStatic(commands::BenchStaticArgs),
    /// Monte Carlo infidelity under colored dephasing noise.
    BenchDynamic(commands::BenchDynamicArgs),
    /// Dephasing filter function table.
    Filterfn(commands::FilterfnArgs),
    /// Curve filtering index of a closed curve.
    Cfi(commands::CfiArgs),
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical { message: String, trace: Option<PathBuf> },
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self::Validation(message)
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "error: {m}"),
            Self::Numerical { message, trace: Some(p) } => {
                write!(f, "numerical failure: {message}\ntrace: {}", p.display())
            }
            Self::Numerical { message, trace: None } => write!(f, "numerical failure: {message}"),
        }
    }
}

impl From<curveforge::Error> for CliError {
    fn from(e: curveforge::Error) -> Self {
        if e.is_validation() {
            Self::Validation(e.to_string())
        } else {
            Self::Numerical { message: e.to_string(), trace: None }
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CURVEFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("CURVEFORGE_THREADS: expected a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("CURVEFORGE_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Design(a) => commands::design(a),
        Command::Pulse(a) => commands::pulse(a),
        Command::Frame(a) => commands::frame(a),
        Command::BenchStatic(a) => commands::bench_static(a),
        Command::BenchDynamic(a) => commands::bench_dynamic(a),
        Command::Filterfn(a) => commands::filterfn(a),
        Command::Cfi(a) => commands::cfi(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors, including unknown subcommands.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
