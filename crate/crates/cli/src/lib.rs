//! Command-line front end: `simulate`, `converge`, `infer`, `wasserstein`
//! and `check`.
//!
//! Exit codes: 0 on success, 1 when the command line or configuration is
//! invalid, 2 when a run fails after validation.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod output;
pub mod run;
pub mod svg;

pub use config::{parse_config, Command, ConfigError, RunConfig, Settings};
pub use run::{execute, RunError, RunOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "splitsde", version, about = "Splitting schemes and pseudo-likelihood estimators for scalar SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Simulate paths and write paths.csv.
    Simulate(RunArgs),
    /// Strong error curves against a fine-grid reference (mse.csv, slopes.csv).
    Converge(RunArgs),
    /// Monte-Carlo inference study (estimates.csv, summary.csv).
    Infer(RunArgs),
    /// One-step Wasserstein-1 distances to the exact law (wasserstein.csv).
    Wasserstein(RunArgs),
    /// Run the invariant suite.
    Check(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key=value configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    /// Parameter values, e.g. theta=2,mu=6,b=0.2
    #[arg(long)]
    pub params: Option<String>,
    /// Optimizer starting point, e.g. mu=1,b=1
    #[arg(long)]
    pub init: Option<String>,
    /// Parameters held at their true value during inference, e.g. theta
    #[arg(long)]
    pub fix: Option<String>,
    /// Comma-separated scheme ids.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Comma-separated estimator ids.
    #[arg(long)]
    pub estimators: Option<String>,
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long = "h-fine")]
    pub h_fine: Option<String>,
    /// Comma-separated step sizes; `2^-4` notation is accepted.
    #[arg(long = "h-obs")]
    pub h_obs: Option<String>,
    #[arg(long = "T")]
    pub t: Option<String>,
    #[arg(long = "M")]
    pub m: Option<String>,
    /// Comma-separated observation counts.
    #[arg(long = "N")]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Root directory; each run gets a `<timestamp>-seed<seed>` subdirectory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "paper-scale")]
    pub paper_scale: bool,
    /// Shorten ODE sub-flows near an attainable zero boundary.
    #[arg(long)]
    pub adaptive: bool,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub threads: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Run(#[from] RunError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } => EXIT_INVALID,
            CliError::Run(_) => EXIT_RUNTIME,
        }
    }
}

impl CliCommand {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            CliCommand::Simulate(a) => (Command::Simulate, a),
            CliCommand::Converge(a) => (Command::Converge, a),
            CliCommand::Infer(a) => (Command::Infer, a),
            CliCommand::Wasserstein(a) => (Command::Wasserstein, a),
            CliCommand::Check(a) => (Command::Check, a),
        }
    }
}

/// Config file settings with the command-line flags layered on top.
pub fn settings_from_args(args: &RunArgs) -> Result<Settings, CliError> {
    let mut settings = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            Settings::from_text(&text)?
        }
        None => Settings::default(),
    };
    let plain = [
        ("model", &args.model),
        ("fix", &args.fix),
        ("scheme", &args.scheme),
        ("estimators", &args.estimators),
        ("x0", &args.x0),
        ("h_fine", &args.h_fine),
        ("h_obs", &args.h_obs),
        ("T", &args.t),
        ("M", &args.m),
        ("N", &args.n),
        ("seed", &args.seed),
        ("threads", &args.threads),
    ];
    for (key, value) in plain {
        if let Some(v) = value {
            settings.set_flag(key, v.as_str());
        }
    }
    if let Some(p) = &args.params {
        settings.set_flag_pairs("", p)?;
    }
    if let Some(p) = &args.init {
        settings.set_flag_pairs("init.", p)?;
    }
    if let Some(out) = &args.out {
        settings.set_flag("out", out.display().to_string());
    }
    for (key, on) in [("paper_scale", args.paper_scale), ("adaptive", args.adaptive), ("svg", args.svg)] {
        if on {
            settings.set_flag(key, "true");
        }
    }
    Ok(settings)
}

pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let (command, args) = cli.command.split();
    Ok(parse_config(command, settings_from_args(args)?)?)
}

/// Parses `argv`, runs, prints a report and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = resolve(&cli).and_then(|cfg| Ok(execute(&cfg)?));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("wrote {}", outcome.dir.display());
            EXIT_OK
        }
        Err(e) => {
            if let CliError::Run(RunError::ChecksFailed { dir, .. }) = &e {
                eprintln!("report in {}", dir.display());
            }
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
