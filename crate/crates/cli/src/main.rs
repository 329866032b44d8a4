mod plots;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ztmesh_core::config::{ConfigError, ScenarioConfig};
use ztmesh_core::scenario::{self, ScenarioError};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "ztmesh", version, about = "Run cross-domain zero-trust and DFL scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write latency, throughput, counter and DFL CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the event log as trace.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// DFL training only; writes dfl_metrics.csv and final checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured round count.
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarise the CSVs in a directory, optionally rendering SVG plots there.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        plots: bool,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Input(#[from] report::ReportError),
    #[error(transparent)]
    Runtime(#[from] ScenarioError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(report::ReportError::MissingInput(_)) => EXIT_CONFIG,
            CliError::Input(_) | CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, seed, out, trace } => {
            let cfg = load(&config, seed)?;
            let outputs = scenario::simulate(&cfg, trace)?;
            outputs.write(&out, trace).map_err(ScenarioError::from)?;
            log::info!("wrote {} latency rows to {}", outputs.latency.len(), out.display());
        }
        Command::Train { config, rounds, seed, out } => {
            let mut cfg = load(&config, seed)?;
            if let Some(seed) = seed {
                cfg.dfl.data.seed = seed;
            }
            let outputs = scenario::train(&cfg, rounds)?;
            outputs.write(&out).map_err(ScenarioError::from)?;
            log::info!("wrote {} checkpoints to {}", outputs.checkpoints.len(), out.display());
        }
        Command::Report { input, plots } => {
            let data = report::load(&input)?;
            print!("{}", report::summary(&data));
            if plots {
                for path in plots::render(&data, &input).map_err(report::ReportError::Plot)? {
                    println!("plot {}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZTMESH_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
