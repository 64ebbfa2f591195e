//! Synthetic domain-shift benchmarks, the broad "universal" pretraining
//! distribution, pretraining, and dataset persistence.
//!
//! Target-domain ground truth is split off into [`GroundTruth`], which only
//! answers aggregate questions (accuracy, noise rates). Adaptation code
//! receives a [`TargetView`] that carries no labels at all.

mod dataset;
mod pretrain;
mod shift;

pub use dataset::{load_dataset, save_dataset, Dataset, Domain, GroundTruth, TargetView};
pub use pretrain::{evaluate, linear_probe_accuracy, pretrain, AccuracyReport, PretrainConfig, PretrainOutcome};
pub use shift::{generate_benchmark, generate_universal, ShiftConfig, UniversalConfig};
