use crate::curriculum::{pseudo_label, SubsetSplit};
use crate::data::{GroundTruth, TargetView};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Sgd};
use crate::numerics::RandomSource;

use super::config::AdaptationConfig;
use super::engine::{label_metrics, student_phase, AdaptationOutcome, TrainingSubset, SHUFFLE_STREAM};
use super::metrics::{EpochMetrics, MetricsLog};

/// Naive self-training: each epoch labels every target sample with the
/// current model's prediction and trains the model itself on them for
/// `student_epochs` passes. No filtering, mixing or fusion.
pub fn adapt_baseline(
    source: &ModelParams,
    target: &TargetView,
    truth: Option<&GroundTruth>,
    cfg: &AdaptationConfig,
) -> Result<AdaptationOutcome> {
    cfg.validate_fields()?;
    if target.is_empty() {
        return Err(Error::usage("target set is empty"));
    }
    if target.classes() != source.classes() || target.inputs().cols() != source.input_dim() {
        return Err(Error::usage("target set does not match the source model"));
    }
    let mut rng = RandomSource::new(cfg.seed).derive(SHUFFLE_STREAM);
    let mut model = source.clone();
    let mut metrics = MetricsLog::default();
    let mut last = None;
    let everything = SubsetSplit::everything(target.len());
    for n in 1..=cfg.epochs {
        let labels = pseudo_label(&model, target)?;
        let hard = labels.hard();
        let subset = TrainingSubset::select(target, &everything.trustworthy, &hard);
        let mut opt = Sgd::new(cfg.sgd())?;
        let loss = student_phase(&mut model, &mut opt, &subset, cfg, &mut rng)?;
        let mut row = EpochMetrics {
            epoch: n,
            beta: 1.0,
            tt_size: target.len(),
            ut_size: 0,
            r: 1.0,
            loss_std: loss,
            notes: vec!["baseline".into()],
            ..Default::default()
        };
        label_metrics(&mut row, truth, target, &model, &hard, &everything.trustworthy)?;
        metrics.rows.push(row);
        last = Some(labels);
    }
    Ok(AdaptationOutcome {
        model,
        metrics,
        final_labels: last,
        final_split: (cfg.epochs > 0).then_some(everything),
    })
}
