use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SgdConfig;

/// Every knob of an adaptation run. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationConfig {
    /// Target epochs `N`.
    pub epochs: usize,
    /// Student sub-epochs on the curriculum loss per epoch.
    pub student_epochs: usize,
    /// Sub-epochs on the total loss (curriculum + mixup) per epoch.
    pub mix_epochs: usize,
    /// Weight of cross-entropy against the entropy term in the student loss.
    pub gamma: f64,
    /// Weight of the mixup loss in the total loss.
    pub mu: f64,
    /// Normalized-entropy threshold of the trustworthy subset.
    pub tau_norm: f64,
    pub alpha_intra: f64,
    pub alpha_inter: f64,
    pub beta0: f64,
    pub beta_final: f64,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Upper bound on intra-mixup pairs per sub-epoch.
    pub intra_pair_budget: usize,
    pub seed: u64,
    pub enable_filtering: bool,
    pub enable_mixup: bool,
    pub enable_colearning: bool,
    /// Re-initialize the student classifier from the latest fused model
    /// instead of the original source classifier.
    pub student_classifier_from_latest: bool,
    /// Label untrustworthy mixing partners with their prototype label
    /// instead of the classifier's label.
    pub inter_labels_refined: bool,
    /// Keep the previous model when an epoch has no trustworthy samples.
    pub skip_fusion_on_empty: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            student_epochs: 10,
            mix_epochs: 5,
            gamma: 0.3,
            mu: 1.0,
            tau_norm: 0.3,
            alpha_intra: 1.0,
            alpha_inter: 2.0,
            beta0: 0.3,
            beta_final: 0.8,
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 64,
            intra_pair_budget: 1024,
            seed: 0,
            enable_filtering: true,
            enable_mixup: true,
            enable_colearning: true,
            student_classifier_from_latest: false,
            inter_labels_refined: false,
            skip_fusion_on_empty: false,
        }
    }
}

impl AdaptationConfig {
    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    /// Checks every field except `epochs`, which may be zero for the engine.
    pub fn validate_fields(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if self.student_epochs == 0 {
            return bad("student_epochs", "must be at least 1");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma", "must be non-negative");
        }
        if !(self.mu >= 0.0) {
            return bad("mu", "must be non-negative");
        }
        if !(self.tau_norm > 0.0 && self.tau_norm <= 1.0) {
            return bad("tau_norm", "must lie in (0, 1]");
        }
        if !(self.alpha_intra > 0.0) {
            return bad("alpha_intra", "must be positive");
        }
        if !(self.alpha_inter > 0.0) {
            return bad("alpha_inter", "must be positive");
        }
        if !(0.0 <= self.beta0 && self.beta0 <= self.beta_final && self.beta_final <= 1.0) {
            return bad("beta0", "need 0 <= beta0 <= beta_final <= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        self.sgd().validate().map_err(|e| match e {
            Error::Usage(m) => Error::Config(m),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs: must be at least 1".into()));
        }
        self.validate_fields()
    }
}
