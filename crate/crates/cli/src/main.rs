//! `nlsusy`: Riccati solves, partner construction, residual verification and
//! vacuum evolution from a JSON config.
//!
//! Exit status: 0 when every required check passes, 1 when a check fails or
//! a solver cannot produce a result, 2 for configuration, input and IO
//! errors.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlsusy_core::Error;

use crate::commands::Ctx;
use crate::config::Config;

#[derive(Debug)]
pub enum CliError {
    /// Bad config, input or IO; exit 2.
    Usage(String),
    /// The computation itself failed; exit 1.
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Failed(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Nodeful { .. } | Error::Unbounded(_) | Error::Numeric(_) | Error::EvolutionHalted { .. } => {
                Self::Failed(e.to_string())
            }
            Error::Input(_)
            | Error::FullyMasked(_)
            | Error::Singular { .. }
            | Error::BrokenSusy { .. }
            | Error::Bracket(_)
            | Error::Contract(_) => Self::Usage(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Failed(_) => 1,
        }
    }
}

mod diag {
    use std::io::IsTerminal;

    fn paint(code: &str, tag: &str) -> String {
        if std::env::var_os("NLSUSY_NO_COLOR").is_some() || !std::io::stderr().is_terminal() {
            tag.to_string()
        } else {
            format!("\x1b[{code}m{tag}\x1b[0m")
        }
    }

    pub fn warn(msg: &str) {
        eprintln!("{}: {msg}", paint("33", "warning"));
    }

    pub fn error(msg: &str) {
        eprintln!("{}: {msg}", paint("31", "error"));
    }
}

#[derive(Parser)]
#[command(name = "nlsusy", version, about = "Partner construction and verification for nonlinear Schrödinger eigenproblems")]
struct Cli {
    /// JSON config; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`, default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies every tolerance.
    #[arg(long, global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    tol_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve for the superpotential of the catalog state.
    Riccati,
    /// Build the partner state and recover W from the pair.
    Partner,
    /// Run the residual suite on the catalog or on input CSVs.
    Verify,
    /// Evolve a sech vacuum state and check drift, residuals and scaling.
    Vacuum,
    /// Write the four sampled closed forms (phi, psi, u, W).
    Figure2,
    /// Verify the catalog for several eta in parallel.
    Sweep,
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Ctx::new(config, cli.out.clone(), cli.tol_scale)?;
    match cli.command {
        Command::Riccati => commands::riccati(&ctx),
        Command::Partner => commands::partner(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Vacuum => commands::vacuum(&ctx),
        Command::Figure2 => commands::figure2(&ctx),
        Command::Sweep => commands::sweep(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            diag::error(&e.to_string());
            ExitCode::from(e.code())
        }
    }
}
