//! `ser` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod run_config;

pub use run_config::{AugmentSettings, RunConfig};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audio_io::Dataset;
use crate::dsp::FeatureKind;
use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "ser", version, about = "Speech emotion recognition with DeepResLFLB")]
pub struct Cli {
    /// Run config file (`key = value` with `[section]` headers).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override any config value, e.g. `--set train.max_epochs=20`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads for extraction and parallel folds.
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Emodb,
    Ravdess,
}

impl From<DatasetArg> for Dataset {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Emodb => Dataset::Emodb,
            DatasetArg::Ravdess => Dataset::Ravdess,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Lms,
    Lmsddc,
}

impl From<FeatureArg> for FeatureKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Lms => FeatureKind::Lms,
            FeatureArg::Lmsddc => FeatureKind::Lmsddc,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Manifest CSV written by `ser scan`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "lms")]
    pub feature: FeatureArg,
    /// Feature cache root (default: $SER_CACHE_DIR, else `<out>/cache`).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Model config file; model sections of `--config` are used otherwise.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Catalog a corpus directory into a manifest CSV.
    Scan {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, value_enum)]
        dataset: DatasetArg,
        /// Manifest output path.
        #[arg(long, default_value = "manifest.csv")]
        out: PathBuf,
        /// Rejected-file list (default: `<out>.rejects.csv`).
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Compute and cache features for every manifest entry.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "lms")]
        feature: FeatureArg,
        /// Cache root (default: $SER_CACHE_DIR, else `./ser-cache`).
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Also cache the augmented variants.
        #[arg(long)]
        augment: bool,
    },
    /// Write every augmentation variant of one clip for inspection.
    AugmentPreview {
        #[arg(long)]
        input: PathBuf,
        /// Directory for the WAV and feature files of each variant.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "lms")]
        feature: FeatureArg,
    },
    /// Train one model on a stratified train/validation/test split.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory for history, weights, split and metrics.
        #[arg(long)]
        out: PathBuf,
    },
    /// k-fold cross-validation with per-fold loss curves and checkpoints.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory for per-fold artifacts and aggregate metrics.
        #[arg(long)]
        out: PathBuf,
        /// Number of folds (overrides `run.k`).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Trainable parameters of DeepResLFLB and the plain-LFLB baseline.
    Paramcount {
        #[arg(long)]
        model_config: Option<PathBuf>,
        /// Feature kind; both are listed when omitted.
        #[arg(long, value_enum)]
        feature: Option<FeatureArg>,
        #[arg(long, default_value_t = 7)]
        classes: usize,
    },
    /// Merge metrics JSON files into one table.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write `<out>.csv` and `<out>.json` as well as printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<(), Error> {
    commands::dispatch(cli)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
