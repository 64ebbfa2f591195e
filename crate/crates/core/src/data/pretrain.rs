use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    forward, head_gradient, loss_and_gradients, sgd_update, Dense, LossSpec, ModelParams, Sgd,
    SgdConfig,
};
use crate::numerics::prob::softmax_unchecked;
use crate::numerics::{ProbVector, RandomSource};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![32],
            feature_dim: 16,
            epochs: 40,
            batch_size: 64,
            sgd: SgdConfig {
                lr: 0.02,
                momentum: 0.9,
                weight_decay: 1e-4,
            },
        }
    }
}

impl PretrainConfig {
    pub fn layer_dims(&self, input_dim: usize, classes: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.feature_dim);
        dims.push(classes);
        dims
    }
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    pub params: ModelParams,
    pub train_accuracy: f64,
    /// Set when training accuracy ends below 80%.
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub samples: usize,
    pub accuracy: f64,
    /// `None` for classes absent from the data.
    pub per_class: Vec<Option<f64>>,
    /// Unweighted mean of the available per-class accuracies.
    pub class_average: f64,
}

/// Accuracy of `params` on a labelled dataset.
pub fn evaluate(params: &ModelParams, data: &Dataset) -> Result<AccuracyReport> {
    if data.classes() > params.classes() {
        return Err(Error::usage(format!(
            "dataset has {} classes, model predicts {}",
            data.classes(),
            params.classes()
        )));
    }
    let preds = forward(params, data.inputs())?.predictions();
    let (_, truth) = data.split_labels();
    let per_class = truth.per_class_accuracy(&preds);
    let avail: Vec<f64> = per_class.iter().flatten().copied().collect();
    let class_average = if avail.is_empty() {
        0.0
    } else {
        avail.iter().sum::<f64>() / avail.len() as f64
    };
    Ok(AccuracyReport {
        samples: data.len(),
        accuracy: truth.accuracy(&preds),
        per_class,
        class_average,
    })
}

/// Mini-batch SGD on cross-entropy. With `init_extractor` the extractor
/// starts from those weights and only the classifier is freshly drawn.
pub fn pretrain(
    data: &Dataset,
    cfg: &PretrainConfig,
    init_extractor: Option<&[Dense]>,
    rng: &mut RandomSource,
) -> Result<PretrainOutcome> {
    if data.is_empty() {
        return Err(Error::usage("cannot pretrain on an empty dataset"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::usage("batch_size must be positive"));
    }
    let dims = cfg.layer_dims(data.input_dim(), data.classes());
    let mut params = ModelParams::init(&dims, rng)?;
    if let Some(ext) = init_extractor {
        let classifier = params.classifier().clone();
        params = crate::model::init_student(ext, &classifier)?;
        if params.layer_dims() != dims {
            return Err(Error::usage(format!(
                "initial extractor gives layer dims {:?}, config wants {dims:?}",
                params.layer_dims()
            )));
        }
    }
    let targets: Vec<ProbVector> = data
        .labels()
        .iter()
        .map(|&l| ProbVector::one_hot(l, data.classes()))
        .collect();
    let mut opt = Sgd::new(cfg.sgd)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let x = data.inputs().select_rows(batch);
            let t: Vec<ProbVector> = batch.iter().map(|&i| targets[i].clone()).collect();
            let (_, g) = loss_and_gradients(&params, &x, Some(&t), LossSpec::cross_entropy_only())?;
            opt.step(&mut params, &g)?;
        }
    }
    let train_accuracy = evaluate(&params, data)?.accuracy;
    let warning = (cfg.epochs > 0 && train_accuracy < 0.8).then(|| {
        format!(
            "pretraining reached only {:.1}% training accuracy",
            100.0 * train_accuracy
        )
    });
    Ok(PretrainOutcome {
        params,
        train_accuracy,
        warning,
    })
}

/// Fits a linear softmax head on frozen features of `extractor_of` and
/// returns its accuracy on the same data: a measure of how linearly
/// separable the features are.
pub fn linear_probe_accuracy(extractor_of: &ModelParams, data: &Dataset, steps: usize) -> Result<f64> {
    let feats = forward(extractor_of, data.inputs())?.activations.pop().unwrap();
    let (n, d, k) = (feats.rows(), feats.cols(), data.classes());
    let mut head = Dense::zeros(d, k);
    let mut vel_w = vec![0.0; d * k];
    let mut vel_b = vec![0.0; k];
    let cfg = SgdConfig {
        lr: 0.5,
        momentum: 0.9,
        weight_decay: 0.0,
    };
    let logits_of = |head: &Dense, r: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|j| head.bias[j] + head.weight.row(j).iter().zip(r).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    };
    let mut d_logits = vec![0.0; k];
    let scale = 1.0 / n as f64;
    for _ in 0..steps {
        let mut gw = vec![0.0; d * k];
        let mut gb = vec![0.0; k];
        for (r, &label) in feats.row_iter().zip(data.labels()) {
            let p = softmax_unchecked(&logits_of(&head, r));
            let t = ProbVector::one_hot(label, k);
            head_gradient(&p, Some(t.as_slice()), LossSpec::cross_entropy_only(), scale, &mut d_logits);
            for j in 0..k {
                gb[j] += d_logits[j];
                for i in 0..d {
                    gw[j * d + i] += d_logits[j] * r[i];
                }
            }
        }
        sgd_update(head.weight.data_mut(), &gw, &mut vel_w, &cfg);
        sgd_update(&mut head.bias, &gb, &mut vel_b, &cfg);
    }
    let preds: Vec<usize> = feats
        .row_iter()
        .map(|r| ProbVector::new(softmax_unchecked(&logits_of(&head, r))).map(|p| p.argmax()))
        .collect::<Result<_>>()?;
    let (_, truth) = data.split_labels();
    Ok(truth.accuracy(&preds))
}
