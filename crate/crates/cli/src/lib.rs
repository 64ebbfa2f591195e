//! Command-line front end: dataset generation, pretraining, adaptation,
//! evaluation and feature dumps. Every command writes a JSON manifest next
//! to its outputs.

mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{parse_seeds, read_config};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sfda", version, about = "Source-free domain adaptation on synthetic shift benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate source, target and universal datasets.
    Gen(GenArgs),
    /// Pretrain a model on a labelled dataset.
    Pretrain(PretrainArgs),
    /// Adapt a source model to an unlabelled target set.
    Adapt(AdaptArgs),
    /// Report accuracy of a checkpoint on a labelled dataset.
    Eval(EvalArgs),
    /// Write extractor features of every sample for plotting.
    DumpFeatures(DumpArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Shift configuration (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub source_samples: Option<usize>,
    #[arg(long)]
    pub target_samples: Option<usize>,
    #[arg(long)]
    pub universal_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Labelled dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint whose extractor initializes the model; the classifier is
    /// drawn fresh.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Pretraining configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    Filtering,
    Mixup,
    Colearning,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Source model checkpoint.
    #[arg(long)]
    pub source: PathBuf,
    /// Universal model checkpoint; only its extractor is used.
    #[arg(long)]
    pub universal: PathBuf,
    /// Target dataset CSV. Its labels are used for metrics only.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Adaptation configuration (JSON), or a manifest of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Several seeds, `a..b` (inclusive) or `a,b,c`; one subdirectory each.
    #[arg(long, conflicts_with = "seed")]
    pub seeds: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub tau_norm: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Run naive self-training instead.
    #[arg(long)]
    pub baseline: bool,
    /// Disable a component; repeatable.
    #[arg(long, value_enum)]
    pub ablate: Vec<Ablation>,
    /// Classes reported in the `hard_class_noise_rate` column, e.g. `3` or `1,3`.
    #[arg(long, value_delimiter = ',')]
    pub hard_classes: Vec<usize>,
    /// Write each epoch's pseudo-labels and split under `splits/`.
    #[arg(long)]
    pub dump_splits: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Threshold for the `subset` column.
    #[arg(long, default_value_t = 0.3)]
    pub tau_norm: f64,
}

/// Maps an error to its exit code: numeric failures are 3, everything else 2.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sfda_core::Error>() {
            return if e.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE };
        }
    }
    EXIT_USAGE
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let invocation: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(cli.command, &invocation) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
