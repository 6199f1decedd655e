//! `topdown`: synthesize circuits, run scalability sweeps, simulate the
//! two-photon demo, and recover transfer matrices from intensity data.
//!
//! Machine-readable output goes to stdout and artifact files only; all
//! human-readable progress goes to stderr. Exit codes: 0 success, 2 config
//! error, 3 fidelity target not met, 4 optimization failure.

mod artifact;
mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use crate::artifact::{config_hash, ArtifactHeader};
use crate::config::RunConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn target_not_met(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn optimization(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    /// Core errors during setup are configuration mistakes.
    pub fn from_setup(e: topdown::Error) -> Self {
        CliError::config(e.to_string())
    }

    /// Core errors during a run are runtime failures.
    pub fn from_run(e: topdown::Error) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "topdown", version, about = "Top-down inverse design of linear optical circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve phase planes for a target gate and write the circuit JSON.
    Synthesize(CommonArgs),
    /// Run the (n, d, L) × gate grid study and write row/summary CSVs.
    Sweep(CommonArgs),
    /// Apply a synthesized gate to an entangled state, simulate coincidence
    /// measurements, reconstruct the state, and witness entanglement.
    QuantumDemo(CommonArgs),
    /// Recover a hidden mixer from intensity-only synthetic data.
    TmRecover(CommonArgs),
}

/// Everything a command needs: parsed config, provenance header, out dir.
pub struct Context {
    pub config: RunConfig,
    pub header: ArtifactHeader,
    pub base_seed: topdown::RngSeed,
    /// Set when the seed came from --seed or the config, rather than the
    /// built-in default.
    pub explicit_seed: Option<u64>,
    pub out_dir: PathBuf,
}

fn prepare(common: &CommonArgs) -> Result<Context, CliError> {
    if let Some(workers) = common.workers {
        if workers == 0 {
            return Err(CliError::config("--workers must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let raw = std::fs::read_to_string(&common.config).map_err(|e| {
        CliError::config(format!("cannot read {}: {e}", common.config.display()))
    })?;
    let config: RunConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::config(format!("bad config: {e}")))?;
    let explicit_seed = common.seed.or(config.seed);
    let base_seed = config.base_seed(common.seed);

    // the resolved config = file content with the effective seed substituted
    let mut resolved: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| CliError::config(format!("bad config: {e}")))?;
    if let serde_json::Value::Object(map) = &mut resolved {
        map.insert("seed".into(), serde_json::json!(base_seed.0));
    }
    let header = ArtifactHeader::new(config_hash(&resolved), base_seed.0);

    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::io(format!("create {}: {e}", common.out.display())))?;
    Ok(Context {
        config,
        header,
        base_seed,
        explicit_seed,
        out_dir: common.out.clone(),
    })
}

fn run() -> Result<(), CliError> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Synthesize(common) => commands::synthesize::run(prepare(common)?),
        Command::Sweep(common) => commands::sweep::run(prepare(common)?),
        Command::QuantumDemo(common) => commands::quantum_demo::run(prepare(common)?),
        Command::TmRecover(common) => commands::tm_recover::run(prepare(common)?),
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
