//! Command-line front end: parses a TOML model description, dispatches to
//! the library and writes JSON reports plus CSV curves.

pub mod budget;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub use budget::Budget;
pub use commands::{Context, Outcome, ALL_CHECKS};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fsde", version, about = "Rate certificates, spectral analysis and Monte Carlo checks for stochastic delay equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explicit convergence-rate certificates
    Certify(CommonArgs),
    /// Spectral abscissa, fundamental solution table and explicit decay bound
    Spectral(CommonArgs),
    /// Simulate the equation from the configured initial segment
    Simulate(CommonArgs),
    /// Monte Carlo checks of the certified inequalities
    Verify(CommonArgs),
    /// certify, spectral and verify in a single report
    Report(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides sim.seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides output.dir
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Budget::Default)]
    pub budget: Budget,
    /// Checks to run (verify and report); default is every supported check
    #[arg(long = "check", num_args = 1..)]
    pub checks: Vec<String>,
    /// Do not print the summary table
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Certify(_) => "certify",
            Self::Spectral(_) => "spectral",
            Self::Simulate(_) => "simulate",
            Self::Verify(_) => "verify",
            Self::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Self::Certify(a) | Self::Spectral(a) | Self::Simulate(a) | Self::Verify(a) | Self::Report(a) => a,
        }
    }
}

/// Result of a command run: the full JSON document and where it went.
pub struct RunOutput {
    pub report: Value,
    pub report_path: PathBuf,
    pub exit_code: i32,
    pub text: String,
}

pub fn execute(cmd: &Command) -> Result<RunOutput, CliError> {
    let args = cmd.args();
    let (cfg, bytes) = RunConfig::load(&args.config)?;
    let hash = output::config_hash(&bytes);
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fsde-out"));
    let ctx = Context::new(cfg, args.seed, args.budget, args.checks.clone())?;
    let outcome = match cmd {
        Command::Certify(_) => commands::certify(&ctx)?,
        Command::Spectral(_) => commands::spectral(&ctx)?,
        Command::Simulate(_) => commands::simulate(&ctx)?,
        Command::Verify(_) => commands::verify(&ctx)?,
        Command::Report(_) => commands::report(&ctx)?,
    };
    let name = cmd.name();
    let report = output::envelope(name, &hash, ctx.seed, ctx.budget.name(), outcome.exit_code, outcome.result);
    let dir = output::OutDir::create(&out_dir)?;
    for (file, contents) in &outcome.files {
        dir.write(file, contents)?;
    }
    let report_path = dir.write_json(&format!("{name}.json"), &report)?;
    Ok(RunOutput {
        report,
        report_path,
        exit_code: outcome.exit_code,
        text: outcome.text,
    })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let quiet = cli.command.args().quiet;
    match execute(&cli.command) {
        Ok(out) => {
            if !quiet {
                print!("{}", out.text);
                println!("report: {}", out.report_path.display());
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("fsde: {e}");
            e.exit_code()
        }
    }
}
