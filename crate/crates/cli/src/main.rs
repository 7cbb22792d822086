//! `plsrod <command> --config <path> --out <dir>`
//!
//! Artifacts go to the output directory and a JSON summary to stdout. Failures print
//! `{"error": {...}}` to stderr and exit with a nonzero code: 2 for config errors,
//! 3 for unreadable files or bad data, 4 for solver failures.

mod commands;
mod config;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use crate::commands::{Command, Context};
use crate::config::{Overrides, Scenario};
use crate::error::CliError;
use crate::output::Artifacts;

#[derive(Debug, Parser)]
#[command(name = "plsrod", version, about = "Piecewise linear strain Cosserat rod simulations")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the artifacts; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Seed for random initial rates and random identification starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gauss–Legendre points per segment, overriding the config.
    #[arg(long)]
    quadrature: Option<usize>,
    /// Segments per section, overriding the config.
    #[arg(long)]
    segments: Option<usize>,
}

fn execute(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let scenario = Scenario::load(&cli.config)?;
    let ctx = Context {
        scenario: &scenario,
        overrides: Overrides { segments: cli.segments, quadrature: cli.quadrature },
        seed: cli.seed,
    };
    let mut out = Artifacts::new(&cli.out)?;
    let summary = commands::run(cli.command, &ctx, &mut out)?;
    let files: Vec<String> = out.written.iter().map(|p| p.display().to_string()).collect();
    Ok(json!({ "summary": summary, "artifacts": files }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
