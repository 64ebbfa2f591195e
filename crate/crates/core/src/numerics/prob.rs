use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm};
use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before taking a logarithm in
/// [`cross_entropy`]. Also the norm threshold of [`cosine_distance`].
pub const LOG_CLAMP: f64 = 1e-12;

const SUM_TOL: f64 = 1e-9;

/// A categorical distribution over `K` classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::usage("probability vector is empty"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::usage("probability entries must lie in [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::usage(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn one_hot(class: usize, classes: usize) -> Self {
        assert!(class < classes, "class {class} out of range for {classes} classes");
        let mut v = vec![0.0; classes];
        v[class] = 1.0;
        Self(v)
    }

    pub fn uniform(classes: usize) -> Self {
        assert!(classes > 0);
        Self(vec![1.0 / classes as f64; classes])
    }

    /// `w·onehot(a) + (1−w)·onehot(b)`.
    pub fn mix_one_hot(a: usize, b: usize, w: f64, classes: usize) -> Self {
        let mut v = vec![0.0; classes];
        v[a] += w;
        v[b] += 1.0 - w;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Most probable class; the lowest index wins exact ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = k;
            }
        }
        best
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    if logits.is_empty() {
        return Err(Error::usage("softmax of an empty vector"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    Ok(ProbVector(softmax_unchecked(logits)))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Shannon entropy in nats, with `0·log 0 = 0`.
pub fn entropy(p: &ProbVector) -> f64 {
    entropy_raw(p.as_slice())
}

pub(crate) fn entropy_raw(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `−Σ target_k · log max(pred_k, 1e-12)`.
pub fn cross_entropy(pred: &ProbVector, target: &ProbVector) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::usage(format!(
            "cross-entropy length mismatch: {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(cross_entropy_raw(pred.as_slice(), target.as_slice()))
}

pub(crate) fn cross_entropy_raw(pred: &[f64], target: &[f64]) -> f64 {
    -pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| if t == 0.0 { 0.0 } else { t * p.max(LOG_CLAMP).ln() })
        .sum::<f64>()
}

/// `1 − cos(u, v)`, in `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::usage(format!(
            "cosine distance dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu <= LOG_CLAMP || nv <= LOG_CLAMP {
        return Err(Error::Degenerate("cosine distance of a near-zero vector".into()));
    }
    let cos = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}
