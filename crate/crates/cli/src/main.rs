mod args;
mod commands;
mod output;

use std::fmt;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;

const EXIT_INVALID: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_CHECKS_FAILED: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Core(bivmac::Error),
    Usage(String),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Usage(s) => f.write_str(s),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<bivmac::Error> for CliError {
    fn from(e: bivmac::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(bivmac::Error::NonConvergence { .. }) => EXIT_NON_CONVERGENCE,
            _ => EXIT_INVALID,
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    }
    let rendered = commands::run(&cli.command, cli.format)?;
    match &cli.output {
        Some(path) => std::fs::write(path, &rendered.text).map_err(CliError::Io)?,
        None => std::io::stdout()
            .lock()
            .write_all(rendered.text.as_bytes())
            .map_err(CliError::Io)?,
    }
    Ok(!rendered.failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INVALID),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECKS_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
