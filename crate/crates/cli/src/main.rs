mod commands;
mod config;
mod model;
mod output;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad parameters or flags (exit 2).
    Usage(String),
    /// A numerical routine failed (exit 3).
    Numeric(String),
    /// A verification check failed (exit 1). The report has already been written.
    Verify(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<biortho_core::Error> for CliError {
    fn from(e: biortho_core::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.command)?;
    log::debug!("resolved config: {cfg:?}");
    let outcome = match &cli.command {
        config::Command::Kernel(_) => commands::kernel(&cfg)?,
        config::Command::Poly(_) => commands::poly(&cfg)?,
        config::Command::Corr(_) => commands::corr(&cfg)?,
        config::Command::Sample(_) => commands::sample(&cfg)?,
        config::Command::Verify(_) => verify::run(&cfg)?,
    };
    output::emit(&cfg, &outcome.table)?;
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(outcome.failures.join("; ")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("biortho: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
