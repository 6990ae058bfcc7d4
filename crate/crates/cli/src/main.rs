//! `wpiot` command-line interface.
//!
//! Every subcommand writes its CSV outputs and a `<name>_manifest.json`
//! into `--out`, and prints a JSON summary on stdout. Failures print a JSON
//! error object on stderr; configuration errors exit with code 2.

mod commands;
mod config_io;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wpiot::sim::FigureId;

use crate::commands::Context;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "wpiot",
    version,
    about = "Channel allocation and power planning for wireless-powered IoT uplinks"
)]
struct Cli {
    /// TOML config, or a JSON config or run manifest.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Monte Carlo episodes per point (overrides `experiment.episodes`).
    #[arg(long, global = true)]
    episodes: Option<usize>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Match users to channels with ECAA and report utilities and stats.
    Allocate,
    /// Plan the power policy for the configured user and write it as CSV.
    Plan,
    /// Run the allocation and power phases end to end.
    Simulate,
    /// Reproduce one figure's sweep as CSV.
    Figure {
        #[arg(value_parser = parse_figure)]
        id: FigureId,
    },
    /// Run the built-in oracle, stationarity and stability checks.
    Selftest,
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse().map_err(|e: wpiot::Error| e.to_string())
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| wpiot::Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut config = config_io::load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    if let Some(episodes) = cli.episodes {
        config.experiment.episodes = episodes;
    }
    config.validate()?;
    let ctx = Context { config, out: cli.out };
    match cli.command {
        Command::Allocate => commands::allocate(&ctx),
        Command::Plan => commands::plan_cmd(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Figure { id } => commands::figure(&ctx, id),
        Command::Selftest => commands::selftest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
