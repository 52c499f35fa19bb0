mod commands;
mod config;
mod output;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, Format};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or parameters. Exit code 2.
    Config(String),
    /// A numerical identity did not hold. Exit code 1.
    Verification(String),
    /// Reading or writing files failed. Exit code 3.
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

/// Spectra, gap labels and Chern numbers of the Harper operator on the rational
/// noncommutative torus.
#[derive(Parser)]
#[command(name = "nct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band spectra over a set of theta; CSV by default, SVG plots with gap labels.
    Butterfly(CommonArgs),
    /// Band edges and gaps per context.
    Gaps(CommonArgs),
    /// Verified (t, s) gap labels per context.
    Labels(CommonArgs),
    /// Ambient and per-gap Chern numbers.
    Chern(CommonArgs),
    /// Run every consistency check and report PASS/FAIL.
    Verify(CommonArgs),
}

fn run(cli: Cli) -> commands::Outcome {
    config::init_threads()?;
    match cli.command {
        Command::Butterfly(a) => commands::butterfly(&config::resolve(&a, Format::Csv)?),
        Command::Gaps(a) => commands::gaps(&config::resolve(&a, Format::Json)?),
        Command::Labels(a) => commands::labels(&config::resolve(&a, Format::Json)?),
        Command::Chern(a) => commands::chern(&config::resolve(&a, Format::Json)?),
        Command::Verify(a) => commands::verify(&config::resolve(&a, Format::Json)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
