use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row per completed epoch. Label-dependent columns are `None` when the
/// run had no evaluation oracle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub beta: f64,
    pub tt_size: usize,
    pub ut_size: usize,
    pub r: f64,
    /// Accuracy of the fused model after this epoch.
    pub target_accuracy: Option<f64>,
    /// Noise of the classifier pseudo-labels this epoch trained against.
    pub noise_rate: Option<f64>,
    pub hard_class_noise_rate: Option<f64>,
    pub tt_noise_rate: Option<f64>,
    pub loss_std: Option<f64>,
    pub loss_mix: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub lambda_intra_mean: Option<f64>,
    pub lambda_inter_mean: Option<f64>,
    pub degenerate_prototypes: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rows: Vec<EpochMetrics>,
}

pub const METRICS_COLUMNS: &[&str] = &[
    "epoch",
    "beta",
    "tt_size",
    "ut_size",
    "r",
    "target_accuracy",
    "noise_rate",
    "hard_class_noise_rate",
    "tt_noise_rate",
    "loss_std",
    "loss_mix",
    "alpha_hat",
    "lambda_intra_mean",
    "lambda_inter_mean",
    "degenerate_prototypes",
    "notes",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn first(&self) -> Option<&EpochMetrics> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.rows.last()
    }

    /// CSV text; the first line is a `#` comment naming the generator.
    pub fn to_csv(&self, prng: &str) -> String {
        let mut out = format!("# prng: {prng}\n{}\n", METRICS_COLUMNS.join(","));
        for m in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                m.epoch,
                m.beta,
                m.tt_size,
                m.ut_size,
                m.r,
                opt(m.target_accuracy),
                opt(m.noise_rate),
                opt(m.hard_class_noise_rate),
                opt(m.tt_noise_rate),
                opt(m.loss_std),
                opt(m.loss_mix),
                opt(m.alpha_hat),
                opt(m.lambda_intra_mean),
                opt(m.lambda_inter_mean),
                m.degenerate_prototypes,
                m.notes.join("; ").replace(',', " "),
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path, prng: &str) -> Result<()> {
        std::fs::write(path, self.to_csv(prng)).map_err(|e| Error::io(path, e))
    }
}
