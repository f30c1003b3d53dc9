//! Command-line front end: reads an optional JSON experiment file, runs one
//! command and writes CSV or JSON.
//!
//! Exit codes: 0 success, 1 failed suite or runtime failure, 2 usage or
//! configuration error.

mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use config::{
    ExperimentConfig, Format, HitParams, LadderBoxParams, LampertiParams, LastPassageParams, ModelArgs,
    PotentialParams, SimulateParams, StripParams,
};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Model(condsub::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Model(condsub::Error::Domain(_) | condsub::Error::InvalidSpec(_)) => 2,
            CliError::Model(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<condsub::Error> for CliError {
    fn from(e: condsub::Error) -> Self {
        CliError::Model(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "condsub",
    version,
    about = "Conditioned subordinators: simulation, potentials and verification suites"
)]
pub struct Cli {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample paths of a subordinator.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        params: SimulateParams,
    },
    /// Tabulate the q-potential U^(q) and the potential density.
    Potential {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        params: PotentialParams,
    },
    /// Sample conditioned paths.
    Condition {
        #[command(subcommand)]
        which: ConditionCommand,
    },
    /// Laplace exponents of the Lamperti representation of a stable subordinator.
    Lamperti {
        #[command(flatten)]
        params: LampertiParams,
    },
    /// Last passage at zero of a finite Markov chain.
    Lastpassage {
        #[command(flatten)]
        params: LastPassageParams,
    },
    /// Brownian ladder process conditioned to stay in a box.
    Ladderbox {
        #[command(flatten)]
        params: LadderBoxParams,
    },
    /// Run a verification suite, or `all`.
    Verify {
        suite: String,
        /// Multiplier on Monte Carlo sample sizes.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Summarize a saved verification report.
    Report { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum ConditionCommand {
    /// Condition to leave [x0, a) by a jump from below a (killing at the jump).
    Strip {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        params: StripParams,
    },
    /// Condition to hit the level y continuously.
    Hit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        params: HitParams,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Potential { .. } => "potential",
            Command::Condition { which: ConditionCommand::Strip { .. } } => "strip",
            Command::Condition { which: ConditionCommand::Hit { .. } } => "hit",
            Command::Lamperti { .. } => "lamperti",
            Command::Lastpassage { .. } => "lastpassage",
            Command::Ladderbox { .. } => "ladderbox",
            Command::Verify { .. } => "verify",
            Command::Report { .. } => "report",
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let name = cli.command.name();
    if let Some(m) = &cfg.module {
        let matches = m == name || (m == "condition" && matches!(name, "strip" | "hit"));
        if !matches {
            return Err(CliError::Config(format!("config is for module '{m}' but the command is '{name}'")));
        }
    }
    let threads = cli.threads.or(cfg.threads);
    let ctx = commands::Context {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        format: cli.format.or(cfg.format),
        sink: output::Sink { out: cli.out.clone().or_else(|| cfg.out.clone()) },
        cfg,
    };
    match threads {
        None => commands::dispatch(&ctx, cli.command),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| commands::dispatch(&ctx, cli.command))
        }
    }
}
