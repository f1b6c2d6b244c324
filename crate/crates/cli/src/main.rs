//! `rff`: simulate captures, extract division features, rank reference
//! devices, train and evaluate classifiers, and run seeded benches.
//!
//! Exit codes: 0 success, 2 configuration error, 3 pipeline error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rff", version, about = "Receiver-agnostic RF fingerprinting toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed (classifier seed for `train`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Extractor(s): RD, HL, DV, RD_STF or RD_LTF. Repeatable or comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub extractor: Vec<String>,
    /// Overrides the SNR (simulate, bench) or filters rows by SNR (train, eval).
    #[arg(long = "snr-db", global = true, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate frames and reference captures to IQ files.
    Simulate,
    /// IQ files or directories to a feature table per extractor.
    Extract {
        inputs: Vec<PathBuf>,
    },
    /// Rank candidate reference devices from a CSI amplitude CSV.
    SelectRef {
        inputs: Vec<PathBuf>,
    },
    /// Train a classifier on a feature table.
    Train {
        inputs: Vec<PathBuf>,
        /// Keep only rows captured by these receivers.
        #[arg(long, value_delimiter = ',')]
        receivers: Vec<String>,
    },
    /// Evaluate one model, or two fused RD models, on feature tables.
    Eval {
        inputs: Vec<PathBuf>,
        /// Model file; give the RD_STF and RD_LTF models to fuse them.
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
    },
    /// Run a full experiment and write the report.
    Bench,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Pipeline(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cli.common),
        Command::Extract { inputs } => commands::extract(&cli.common, &inputs),
        Command::SelectRef { inputs } => commands::select_ref(&cli.common, &inputs),
        Command::Train { inputs, receivers } => commands::train(&cli.common, &inputs, &receivers),
        Command::Eval { inputs, models } => commands::eval(&cli.common, &inputs, &models),
        Command::Bench => commands::bench(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(m) => eprintln!("configuration error: {m}"),
                CliError::Pipeline(m) => eprintln!("pipeline error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
