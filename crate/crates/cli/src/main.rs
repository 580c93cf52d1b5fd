//! `doskit`: dataset generation, training, certification, DOS export and
//! closed-loop simulation from one configuration file.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("certification error: {0}")]
    Certification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Certification(_) => 4,
        }
    }
}

impl From<doskit::Error> for CliError {
    fn from(e: doskit::Error) -> Self {
        use doskit::Error as E;
        let msg = e.to_string();
        match e {
            E::Usage(_) | E::Resource(_) => CliError::Config(msg),
            E::Io(_) | E::Format(_) => CliError::Io(msg),
            E::Stabilizability(_) | E::Numeric(_) | E::Training { .. } => CliError::Numeric(msg),
            E::Certification(_) | E::CertificateViolation(_) => CliError::Certification(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "doskit", version, about = "Domain-of-stabilization estimation with learned Zubov value functions")]
struct Cli {
    /// Run configuration (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` (or `sim_seed` for `simulate`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample training and collocation points and write the dataset.
    GenData,
    /// Train the value network on the dataset.
    Train {
        /// Start from this checkpoint instead of a fresh initialisation.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Design the ellipsoid and search the value-function levels.
    Certify,
    /// Re-check a certificate against the model on its grid.
    ValidateCert,
    /// Export the DOS estimate on the state grid.
    Estimate,
    /// Simulate the closed loop from states sampled in the DOS estimate.
    Simulate {
        /// Overrides `num_trajectories`.
        #[arg(long)]
        num_trajectories: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => config::RunConfig::load(p)?,
        None => config::RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    match (&cli.command, cli.seed) {
        (Command::Simulate { .. }, Some(s)) => cfg.sim_seed = s,
        (_, Some(s)) => cfg.seed = s,
        _ => {}
    }
    if let Command::Simulate { num_trajectories: Some(n) } = cli.command {
        cfg.num_trajectories = n;
    }
    cfg.validate()?;
    match cli.command {
        Command::GenData => commands::gen_data(&cfg),
        Command::Train { init } => commands::train(&cfg, init.as_deref()),
        Command::Certify => commands::certify(&cfg),
        Command::ValidateCert => commands::validate_cert(&cfg),
        Command::Estimate => commands::estimate(&cfg),
        Command::Simulate { .. } => commands::simulate(&cfg),
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DOSKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("DOSKIT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("DOSKIT_THREADS: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
