//! `lgq`: run profile tables, density checks, needle decompositions,
//! quantitative reports, sweeps and the acceptance suite.

mod commands;
mod config;

use clap::{Parser, ValueEnum};
use config::{Config, ConfigError, RawConfig};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "LGQ_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Model isoperimetric profile tables.
    Profile,
    /// Test a density file against the curvature-dimension condition.
    Cdcheck,
    /// Needle decomposition of a test set.
    Needle,
    /// Quantitative report for a test set.
    Quantify,
    /// Quantify over a list of values of one key.
    Sweep,
    /// Acceptance suite.
    Accept,
}

#[derive(Debug, Parser)]
#[command(name = "lgq", version, about)]
struct Cli {
    command: Command,
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for the artifacts.
    #[arg(long, default_value = "lgq-out")]
    output: PathBuf,
}

enum Failure {
    Config(ConfigError),
    Core(lgq_core::Error),
}

impl Failure {
    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Config(e) => ("config", e.to_string()),
            Failure::Core(e) => (e.kind(), e.to_string()),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<lgq_core::Error> for Failure {
    fn from(e: lgq_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

fn init_workers() -> Result<(), Failure> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            lgq_core::Error::InvalidParameter(format!(
                "{WORKERS_ENV} must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| lgq_core::Error::InvalidParameter(e.to_string()))?;
    Ok(())
}

/// Runs the command; `Ok(false)` means it ran but a check failed.
fn run(cli: &Cli) -> Result<bool, Failure> {
    init_workers()?;
    let (mut raw, base) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RawConfig::parse(&text)?, base)
        }
        None => (RawConfig::parse("")?, PathBuf::new()),
    };
    for assignment in &cli.set {
        raw.apply(assignment)?;
    }
    let config = Config::from_raw(&raw, &base)?;
    std::fs::create_dir_all(&cli.output)?;
    let out = cli.output.as_path();
    let (ok, files) = match cli.command {
        Command::Profile => (true, commands::profile(&config, out)?),
        Command::Cdcheck => commands::cdcheck(&config, out)?,
        Command::Needle => (true, commands::needle(&config, out)?),
        Command::Quantify => (true, commands::quantify_cmd(&config, out)?),
        Command::Sweep => (true, commands::sweep(&raw, &config, &base, out)?),
        Command::Accept => commands::accept(&config, out)?,
    };
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
