use super::forward::{classifier_backward, classifier_logits, extract, extractor_backward};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::numerics::prob::{cross_entropy_raw, entropy_raw};
use crate::numerics::{ProbVector, RealMatrix, LOG_CLAMP};

/// Weights of the two per-sample loss terms, both averaged over the batch:
/// `ce_weight · CE(p, target) + entropy_weight · H(p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub ce_weight: f64,
    pub entropy_weight: f64,
}

impl LossSpec {
    /// `γ·CE + H`, the curriculum student loss.
    pub fn student(gamma: f64) -> Self {
        Self {
            ce_weight: gamma,
            entropy_weight: 1.0,
        }
    }

    pub fn cross_entropy_only() -> Self {
        Self {
            ce_weight: 1.0,
            entropy_weight: 0.0,
        }
    }

    pub fn entropy_only() -> Self {
        Self {
            ce_weight: 0.0,
            entropy_weight: 1.0,
        }
    }
}

/// Loss of one row and its gradient with respect to the logits, scaled by
/// `scale`. Entries of `d_logits` are overwritten.
pub fn head_gradient(
    probs: &[f64],
    target: Option<&[f64]>,
    spec: LossSpec,
    scale: f64,
    d_logits: &mut [f64],
) -> f64 {
    d_logits.fill(0.0);
    let mut loss = 0.0;
    if spec.ce_weight != 0.0 {
        let t = target.expect("cross-entropy term needs a target");
        loss += spec.ce_weight * cross_entropy_raw(probs, t);
        // terms clamped at LOG_CLAMP are constant in the logits
        let active_mass: f64 = probs
            .iter()
            .zip(t)
            .filter(|(p, _)| **p >= LOG_CLAMP)
            .map(|(_, t)| t)
            .sum();
        for j in 0..probs.len() {
            let own = if probs[j] >= LOG_CLAMP { t[j] } else { 0.0 };
            d_logits[j] += scale * spec.ce_weight * (probs[j] * active_mass - own);
        }
    }
    if spec.entropy_weight != 0.0 {
        let h = entropy_raw(probs);
        loss += spec.entropy_weight * h;
        for j in 0..probs.len() {
            if probs[j] > 0.0 {
                d_logits[j] -= scale * spec.entropy_weight * probs[j] * (probs[j].ln() + h);
            }
        }
    }
    loss * scale
}

/// Batch-mean loss of `spec` and its exact gradient for every parameter.
pub fn loss_and_gradients(
    params: &ModelParams,
    inputs: &RealMatrix,
    targets: Option<&[ProbVector]>,
    spec: LossSpec,
) -> Result<(f64, ModelParams)> {
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::usage("loss of an empty batch"));
    }
    if spec.ce_weight != 0.0 {
        let t = targets.ok_or_else(|| Error::usage("cross-entropy term without targets"))?;
        if t.len() != n {
            return Err(Error::usage(format!("{} targets for {n} inputs", t.len())));
        }
        if let Some(bad) = t.iter().find(|t| t.len() != params.classes()) {
            return Err(Error::usage(format!(
                "target has {} classes, model has {}",
                bad.len(),
                params.classes()
            )));
        }
    }
    let acts = extract(params, inputs)?;
    let features = acts.last().unwrap();
    let (_, probs) = classifier_logits(params.classifier(), features)?;
    let k = params.classes();
    let scale = 1.0 / n as f64;
    let mut d_logits = RealMatrix::zeros(n, k);
    let mut loss = 0.0;
    for (i, p) in probs.iter().enumerate() {
        let target = targets.map(|t| t[i].as_slice());
        loss += head_gradient(p.as_slice(), target, spec, scale, d_logits.row_mut(i));
    }
    let mut grads = params.zeros_like();
    let d_features =
        classifier_backward(params.classifier(), features, &d_logits, grads.classifier_mut());
    extractor_backward(params, &acts, d_features, &mut grads);
    Ok((loss, grads))
}
