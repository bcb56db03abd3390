//! `gaugekit run <config.json>` and `gaugekit verify [config.json]`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 invariant failure.

mod config;
mod error;
mod output;
mod run;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ScenarioConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gaugekit", version, about = "Gauge-relative light-matter scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and JSON artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides GAUGEKIT_OUT and the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the gauge-list pool.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the invariant suite; the report goes to stdout and `verify_report.json`.
    Verify {
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Run { config, out, threads } => {
            let config = ScenarioConfig::load(&config)?;
            let dir = output::resolve_dir(out.as_deref(), config.output.as_deref());
            output::ensure_dir(&dir)?;
            let summary = with_threads(threads, || run::run(&config, &dir))?;
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            Ok(0)
        }
        Command::Verify { config, out, threads } => {
            let config = match config {
                Some(path) => ScenarioConfig::load(&path)?,
                None => ScenarioConfig::verify_default(),
            };
            let report = with_threads(threads, || verify::verify(&config))?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{text}");
            if out.is_some() || config.output.is_some() || std::env::var_os(output::OUT_ENV).is_some() {
                let dir = output::resolve_dir(out.as_deref(), config.output.as_deref());
                output::ensure_dir(&dir)?;
                output::write_json(&Path::new(&dir).join("verify_report.json"), &report)?;
            }
            Ok(if report.passed { 0 } else { 3 })
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        Some(0) => Err(CliError::config("--threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::ThreadPool(e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    if threads.is_some_and(|n| n > 1) {
        eprintln!("built without the `parallel` feature; --threads is ignored");
    }
    f()
}
