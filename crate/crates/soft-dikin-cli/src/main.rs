//! Batch front end for the soft-threshold Dikin walk sampler.
//!
//! Subcommands: `sample`, `diagnose`, `dp-erm`, `bench`. Runs are described
//! by a TOML config (see the repository README); the only positional pieces
//! are the subcommand itself. Exit codes: 0 ok, 1 config error, 2 numerical
//! failure, 3 lemma violation.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("lemma violation: {0}")]
    Lemma(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) | CliError::Io(_) => 2,
            CliError::Lemma(_) => 3,
        }
    }
}

impl From<soft_dikin::walk::WalkError> for CliError {
    fn from(e: soft_dikin::walk::WalkError) -> Self {
        use soft_dikin::walk::WalkError::*;
        match e {
            InvalidStart | InvalidConfig(_) => CliError::Config(e.to_string()),
            Overflow(_) | Barrier(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<soft_dikin::barrier::BarrierError> for CliError {
    fn from(e: soft_dikin::barrier::BarrierError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<soft_dikin::diagnostics::DiagnosticsError> for CliError {
    fn from(e: soft_dikin::diagnostics::DiagnosticsError) -> Self {
        use soft_dikin::diagnostics::DiagnosticsError::*;
        match e {
            DimensionTooLarge(_) | TooFewSamples { .. } | Precondition(_) => {
                CliError::Config(e.to_string())
            }
            BadOracle(_) => CliError::Numeric(e.to_string()),
            Geometry(g) => CliError::Config(g.to_string()),
            Barrier(b) => CliError::Numeric(b.to_string()),
            Walk(w) => w.into(),
        }
    }
}

#[derive(Parser)]
#[command(name = "soft-dikin", version, about = "Soft-threshold Dikin walk sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the walk and write samples.csv plus report.json.
    Sample {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides walk.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the lemma checkers and write one JSON report per lemma.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated lemma ids (default: every applicable check).
        #[arg(long)]
        suite: Option<String>,
    },
    /// Exponential-mechanism convenience flow for private ERM.
    DpErm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time the per-iteration cost across (m, d) sizes.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample { config, out, seed } => {
            let (cfg, dir) = load(&config)?;
            std::fs::create_dir_all(&out)?;
            commands::cmd_sample(&cfg, &dir, &out, cfg.seed(seed)?)
        }
        Command::Diagnose {
            config,
            out,
            seed,
            suite,
        } => {
            let (cfg, dir) = load(&config)?;
            std::fs::create_dir_all(&out)?;
            let suite = suite.map(|s| {
                s.split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect::<Vec<_>>()
            });
            commands::cmd_diagnose(&cfg, &dir, &out, cfg.seed(seed)?, suite)
        }
        Command::DpErm { config, out, seed } => {
            let (cfg, dir) = load(&config)?;
            std::fs::create_dir_all(&out)?;
            commands::cmd_dp_erm(&cfg, &dir, &out, cfg.seed(seed)?)
        }
        Command::Bench { config, out, seed } => {
            let (cfg, _dir) = load(&config)?;
            std::fs::create_dir_all(&out)?;
            commands::cmd_bench(&cfg, &out, cfg.seed(seed)?)
        }
    }
}

fn load(path: &Path) -> Result<(config::RunConfig, PathBuf), CliError> {
    let cfg = config::RunConfig::load(path)?;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok((cfg, dir))
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("soft-dikin: {e}");
        std::process::exit(e.exit_code());
    }
}
