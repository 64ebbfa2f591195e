//! The adaptation loop: per-epoch curriculum split, student training on the
//! trustworthy subset, mixup training, and scheduled parameter fusion into
//! the source model. Also a naive self-training baseline for comparison.

mod baseline;
mod config;
mod engine;
mod metrics;

pub use baseline::adapt_baseline;
pub use config::AdaptationConfig;
pub use engine::{
    adapt, adapt_observed, mixup_phase, run_epoch, student_phase, AdaptContext, AdaptationOutcome,
    AdaptationState, EpochSnapshot, MixupStats, TrainingSubset,
};
pub use metrics::{EpochMetrics, MetricsLog};
