//! `proxitrace`: ingest corpora, train and evaluate proximity classifiers,
//! reproduce the accuracy table, simulate contact tracing and check the
//! protocol flows. Every run writes `manifest.json` next to its outputs.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "proxitrace",
    version,
    about = "BLE proximity classification and contact-tracing workbench"
)]
pub struct Cli {
    /// Config file for the command (experiment, table or scenario TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Centralized,
    Decentralized,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus into canonical CSV and count samples per stratum.
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Train a tree for one combination and save it as JSON.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// HH, HP, HB, PB, PP, BB, direct or crosswise.
        #[arg(long)]
        combination: String,
    },
    /// Score a saved tree and the RSS threshold on a combination's test split.
    Eval {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        combination: String,
    },
    /// Reproduce the per-combination accuracy table; needs `--config`.
    Table2,
    /// Run a scenario; without a path the bundled benchmark runs.
    Simulate {
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Run random worlds through both protocol flows against a brute-force oracle.
    ProtocolCheck {
        #[arg(long, default_value_t = 100)]
        worlds: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
