//! Feature-space mixup. Intra-mixing pairs trustworthy samples with each
//! other; inter-mixing pairs a trustworthy sample with an untrustworthy one
//! under a mixing ratio restricted by the trust ratio `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classifier_backward, classifier_logits, extract, extractor_backward, head_gradient, LossSpec, ModelParams};
use crate::numerics::{sample_beta, ProbVector, RandomSource, RealMatrix};

/// Lower bound on the restricted Beta parameter.
pub const MIN_ALPHA_HAT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixKind {
    Intra,
    Inter,
}

/// Where mixing ratios come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MixRatio {
    /// `λ ~ Beta(α, α)`.
    Beta(f64),
    /// Every pair uses this λ (test hook and ablation knob).
    Fixed(f64),
}

impl MixRatio {
    fn draw(&self, rng: &mut RandomSource) -> Result<f64> {
        match *self {
            MixRatio::Beta(a) => sample_beta(a, rng),
            MixRatio::Fixed(l) if (0.0..=1.0).contains(&l) => Ok(l),
            MixRatio::Fixed(l) => Err(Error::usage(format!("fixed mixing ratio {l} outside [0, 1]"))),
        }
    }
}

/// `α̂ = max(α·r², 1e-3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestrictedAlpha {
    pub base_alpha: f64,
    pub r: f64,
    pub alpha_hat: f64,
}

impl From<RestrictedAlpha> for MixRatio {
    fn from(a: RestrictedAlpha) -> Self {
        MixRatio::Beta(a.alpha_hat)
    }
}

pub fn restricted_alpha(alpha: f64, r: f64) -> Result<RestrictedAlpha> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::usage(format!("alpha must be positive, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::usage(format!("trust ratio {r} outside [0, 1]")));
    }
    Ok(RestrictedAlpha {
        base_alpha: alpha,
        r,
        alpha_hat: (alpha * r * r).max(MIN_ALPHA_HAT),
    })
}

/// Inter-mixing keeps the trustworthy parent dominant: `λ ← max(λ, 1−λ)`.
pub fn fold_ratio(lambda: f64) -> f64 {
    lambda.max(1.0 - lambda)
}

/// Indices into the first and second pool plus the weight of the first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixPair {
    pub first: usize,
    pub second: usize,
    pub lambda: f64,
}

/// Pairs drawn from one subset against itself. `count` pairs, capped at the
/// subset size; fewer than two samples yields no pairs.
pub fn intra_pairs(n: usize, count: usize, ratio: MixRatio, rng: &mut RandomSource) -> Result<Vec<MixPair>> {
    if n < 2 {
        return Ok(Vec::new());
    }
    let count = count.min(n);
    let a = rng.permutation(n);
    let b = rng.permutation(n);
    (0..count)
        .map(|i| {
            Ok(MixPair {
                first: a[i],
                second: b[i],
                lambda: ratio.draw(rng)?,
            })
        })
        .collect()
}

/// Pairs of (trustworthy, untrustworthy) samples with folded ratios.
pub fn inter_pairs(
    n_tt: usize,
    n_ut: usize,
    count: usize,
    ratio: MixRatio,
    rng: &mut RandomSource,
) -> Result<Vec<MixPair>> {
    if n_tt == 0 || n_ut == 0 {
        return Ok(Vec::new());
    }
    let count = count.min(n_tt).min(n_ut);
    let a = rng.permutation(n_tt);
    let b = rng.permutation(n_ut);
    (0..count)
        .map(|i| {
            Ok(MixPair {
                first: a[i],
                second: b[i],
                lambda: fold_ratio(ratio.draw(rng)?),
            })
        })
        .collect()
}

/// Samples a mixing partner can be drawn from. `inputs` lets the loss
/// recompute features with the current extractor.
#[derive(Clone, Copy, Debug)]
pub struct MixPool<'a> {
    pub features: &'a RealMatrix,
    pub labels: &'a [usize],
    pub inputs: Option<&'a RealMatrix>,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixParents {
    pub first_inputs: RealMatrix,
    pub second_inputs: RealMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedBatch {
    pub kind: MixKind,
    pub mixed_features: RealMatrix,
    pub mixed_labels: Vec<ProbVector>,
    pub lambdas: Vec<f64>,
    /// Parent inputs, present when both pools carried inputs.
    pub parents: Option<MixParents>,
}

impl MixedBatch {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn mean_lambda(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.lambdas.iter().sum::<f64>() / self.len() as f64)
    }
}

/// `x̃ = λx₁ + (1−λ)x₂`, `ỹ = λ·onehot(y₁) + (1−λ)·onehot(y₂)`.
pub fn build_batch(kind: MixKind, pairs: &[MixPair], first: &MixPool, second: &MixPool) -> Result<MixedBatch> {
    if first.features.cols() != second.features.cols() {
        return Err(Error::usage("mixing pools have different feature dimensions"));
    }
    let d = first.features.cols();
    let k = first.classes;
    let mut feats = RealMatrix::zeros(pairs.len(), d);
    let mut labels = Vec::with_capacity(pairs.len());
    let mut lambdas = Vec::with_capacity(pairs.len());
    for (row, p) in pairs.iter().enumerate() {
        let (a, b) = (first.features.row(p.first), second.features.row(p.second));
        for (o, (x, y)) in feats.row_mut(row).iter_mut().zip(a.iter().zip(b)) {
            *o = p.lambda * x + (1.0 - p.lambda) * y;
        }
        labels.push(ProbVector::mix_one_hot(first.labels[p.first], second.labels[p.second], p.lambda, k));
        lambdas.push(p.lambda);
    }
    let parents = match (first.inputs, second.inputs) {
        (Some(a), Some(b)) => Some(MixParents {
            first_inputs: a.select_rows(&pairs.iter().map(|p| p.first).collect::<Vec<_>>()),
            second_inputs: b.select_rows(&pairs.iter().map(|p| p.second).collect::<Vec<_>>()),
        }),
        _ => None,
    };
    Ok(MixedBatch {
        kind,
        mixed_features: feats,
        mixed_labels: labels,
        lambdas,
        parents,
    })
}

/// Intra-mixing within the trustworthy subset.
pub fn intra_mix(tt: &MixPool, ratio: MixRatio, count: usize, rng: &mut RandomSource) -> Result<MixedBatch> {
    let pairs = intra_pairs(tt.labels.len(), count, ratio, rng)?;
    build_batch(MixKind::Intra, &pairs, tt, tt)
}

/// Inter-mixing of trustworthy with untrustworthy samples.
pub fn inter_mix(
    tt: &MixPool,
    ut: &MixPool,
    alpha: RestrictedAlpha,
    count: usize,
    rng: &mut RandomSource,
) -> Result<MixedBatch> {
    let pairs = inter_pairs(tt.labels.len(), ut.labels.len(), count, alpha.into(), rng)?;
    build_batch(MixKind::Inter, &pairs, tt, ut)
}

/// Mean cross-entropy of the classifier on mixed features against the soft
/// mixed labels, with gradients.
///
/// When the batch carries parent inputs, the mixed features are recomputed
/// from them with the current extractor and the gradient reaches the
/// extractor through both parents (weights `λ` and `1−λ`). Otherwise the
/// stored `mixed_features` are used and only the classifier gets gradient.
pub fn mix_loss(student: &ModelParams, mb: &MixedBatch) -> Result<(f64, ModelParams)> {
    let mut grads = student.zeros_like();
    let m = mb.len();
    if m == 0 {
        return Ok((0.0, grads));
    }
    if mb.mixed_features.cols() != student.feature_dim() {
        return Err(Error::usage(format!(
            "mixed features have dimension {}, model features {}",
            mb.mixed_features.cols(),
            student.feature_dim()
        )));
    }
    if mb.mixed_labels.iter().any(|l| l.len() != student.classes()) {
        return Err(Error::usage("mixed label width differs from class count"));
    }
    let parents = match &mb.parents {
        Some(p) => {
            let a = extract(student, &p.first_inputs)?;
            let b = extract(student, &p.second_inputs)?;
            Some((a, b))
        }
        None => None,
    };
    let features = match &parents {
        Some((a, b)) => {
            let (fa, fb) = (a.last().unwrap(), b.last().unwrap());
            let mut f = RealMatrix::zeros(m, fa.cols());
            for (i, &l) in mb.lambdas.iter().enumerate() {
                for (o, (x, y)) in f.row_mut(i).iter_mut().zip(fa.row(i).iter().zip(fb.row(i))) {
                    *o = l * x + (1.0 - l) * y;
                }
            }
            f
        }
        None => mb.mixed_features.clone(),
    };
    let (_, probs) = classifier_logits(student.classifier(), &features)?;
    let scale = 1.0 / m as f64;
    let mut d_logits = RealMatrix::zeros(m, student.classes());
    let mut loss = 0.0;
    for (i, (p, t)) in probs.iter().zip(&mb.mixed_labels).enumerate() {
        loss += head_gradient(
            p.as_slice(),
            Some(t.as_slice()),
            LossSpec::cross_entropy_only(),
            scale,
            d_logits.row_mut(i),
        );
    }
    let d_mixed = classifier_backward(student.classifier(), &features, &d_logits, grads.classifier_mut());
    if let Some((a, b)) = parents {
        let mut da = d_mixed.clone();
        let mut db = d_mixed;
        for (i, &l) in mb.lambdas.iter().enumerate() {
            da.row_mut(i).iter_mut().for_each(|v| *v *= l);
            db.row_mut(i).iter_mut().for_each(|v| *v *= 1.0 - l);
        }
        extractor_backward(student, &a, da, &mut grads);
        extractor_backward(student, &b, db, &mut grads);
    }
    Ok((loss, grads))
}
