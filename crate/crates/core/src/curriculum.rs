//! Prototype-consistency curriculum: soft-weighted class prototypes in
//! feature space, nearest-prototype label refinement, and the split of the
//! target domain into a trustworthy and an untrustworthy subset.

use std::io::Write;
use std::path::Path;

use crate::data::TargetView;
use crate::error::{Error, Result};
use crate::model::{forward, ForwardRecord, ModelParams};
use crate::numerics::matrix::norm;
use crate::numerics::{cosine_distance, entropy, ProbVector, RealMatrix, LOG_CLAMP};

/// Prototype weight mass below which a class is treated as absent.
pub const DEGENERATE_MASS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel {
    pub soft: ProbVector,
    pub hard: usize,
    /// Entropy of `soft` divided by `log K`, in `[0, 1]`.
    pub entropy_norm: f64,
    pub refined: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabelSet {
    pub labels: Vec<PseudoLabel>,
}

impl PseudoLabelSet {
    pub fn from_probs(probs: &[ProbVector]) -> Self {
        let labels = probs
            .iter()
            .map(|p| {
                let k = p.len();
                let entropy_norm = if k > 1 {
                    (entropy(p) / (k as f64).ln()).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                PseudoLabel {
                    soft: p.clone(),
                    hard: p.argmax(),
                    entropy_norm,
                    refined: None,
                }
            })
            .collect();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn hard(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.hard).collect()
    }

    pub fn refined(&self) -> Option<Vec<usize>> {
        self.labels.iter().map(|l| l.refined).collect()
    }

    pub fn set_refined(&mut self, refined: &[usize]) -> Result<()> {
        if refined.len() != self.labels.len() {
            return Err(Error::usage(format!(
                "{} refined labels for {} samples",
                refined.len(),
                self.labels.len()
            )));
        }
        for (l, &r) in self.labels.iter_mut().zip(refined) {
            l.refined = Some(r);
        }
        Ok(())
    }
}

/// Pseudo-labels of a target domain under `model` (refined labels unset).
pub fn pseudo_label(model: &ModelParams, targets: &TargetView) -> Result<PseudoLabelSet> {
    Ok(PseudoLabelSet::from_probs(&forward(model, targets.inputs())?.probs))
}

/// One prototype per class: the softmax-weighted mean of the features of
/// all samples.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeSet {
    pub prototypes: Vec<Vec<f64>>,
    /// `Σ_x δ_k(f(x))` for each class.
    pub weight_mass: Vec<f64>,
}

impl PrototypeSet {
    pub fn is_degenerate(&self, class: usize) -> bool {
        self.weight_mass[class] < DEGENERATE_MASS || norm(&self.prototypes[class]) <= LOG_CLAMP
    }

    pub fn degenerate_count(&self) -> usize {
        (0..self.prototypes.len()).filter(|&k| self.is_degenerate(k)).count()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.first().map_or(0, Vec::len)
    }
}

/// `c_k = Σ_x p_k(x) g(x) / Σ_x p_k(x)`.
pub fn prototypes_from(features: &RealMatrix, probs: &[ProbVector]) -> Result<PrototypeSet> {
    if features.rows() == 0 {
        return Err(Error::usage("prototypes need at least one sample"));
    }
    if probs.len() != features.rows() {
        return Err(Error::usage("one probability vector per feature row required"));
    }
    let k = probs[0].len();
    let d = features.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut mass = vec![0.0; k];
    for (f, p) in features.row_iter().zip(probs) {
        for (c, &w) in p.as_slice().iter().enumerate() {
            mass[c] += w;
            for (s, x) in sums[c].iter_mut().zip(f) {
                *s += w * x;
            }
        }
    }
    let prototypes = sums
        .into_iter()
        .zip(&mass)
        .map(|(s, &m)| {
            if m < DEGENERATE_MASS {
                vec![0.0; d]
            } else {
                s.into_iter().map(|v| v / m).collect()
            }
        })
        .collect();
    Ok(PrototypeSet {
        prototypes,
        weight_mass: mass,
    })
}

pub fn compute_prototypes(model: &ModelParams, targets: &TargetView) -> Result<PrototypeSet> {
    let rec = forward(model, targets.inputs())?;
    prototypes_from(rec.features(), &rec.probs)
}

/// Nearest non-degenerate prototype by cosine distance, lowest class on
/// ties. A zero feature vector is equidistant from everything and so gets
/// the lowest usable class.
pub fn refine_labels(features: &RealMatrix, protos: &PrototypeSet) -> Result<Vec<usize>> {
    if features.cols() != protos.dim() {
        return Err(Error::usage(format!(
            "features have dimension {}, prototypes {}",
            features.cols(),
            protos.dim()
        )));
    }
    let usable: Vec<usize> = (0..protos.prototypes.len())
        .filter(|&k| !protos.is_degenerate(k))
        .collect();
    if usable.is_empty() {
        return Err(Error::Config("every class prototype is degenerate".into()));
    }
    features
        .row_iter()
        .map(|f| {
            let mut best = usable[0];
            let mut best_d = f64::INFINITY;
            for &k in &usable {
                let d = match cosine_distance(f, &protos.prototypes[k]) {
                    Ok(d) => d,
                    Err(Error::Degenerate(_)) => return Ok(usable[0]),
                    Err(e) => return Err(e),
                };
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Partition of target indices with `r = |trustworthy| / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetSplit {
    pub trustworthy: Vec<usize>,
    pub untrustworthy: Vec<usize>,
    pub r: f64,
}

impl SubsetSplit {
    pub fn from_mask(mask: &[bool]) -> Self {
        let (mut tt, mut ut) = (Vec::new(), Vec::new());
        for (i, &m) in mask.iter().enumerate() {
            if m {
                tt.push(i);
            } else {
                ut.push(i);
            }
        }
        let r = trust_ratio(tt.len(), ut.len());
        Self {
            trustworthy: tt,
            untrustworthy: ut,
            r,
        }
    }

    /// Every sample trustworthy (filtering disabled).
    pub fn everything(n: usize) -> Self {
        Self::from_mask(&vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.trustworthy.len() + self.untrustworthy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `|D_tt| / (|D_tt| + |D_ut|)`; zero for an empty domain.
pub fn trust_ratio(tt: usize, ut: usize) -> f64 {
    if tt + ut == 0 {
        0.0
    } else {
        tt as f64 / (tt + ut) as f64
    }
}

/// Sample `i` is trustworthy iff its normalized entropy is below `tau_norm`
/// and its classifier label agrees with its prototype label.
pub fn split_trustworthy(pl: &PseudoLabelSet, tau_norm: f64) -> Result<SubsetSplit> {
    if !(tau_norm > 0.0 && tau_norm <= 1.0) {
        return Err(Error::usage(format!("tau_norm must lie in (0, 1], got {tau_norm}")));
    }
    let mask = pl
        .labels
        .iter()
        .map(|l| {
            let refined = l
                .refined
                .ok_or_else(|| Error::usage("split requires refined labels"))?;
            Ok(l.entropy_norm < tau_norm && l.hard == refined)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(SubsetSplit::from_mask(&mask))
}

/// Everything one curriculum step derives from the current model.
#[derive(Clone, Debug)]
pub struct CurriculumRound {
    pub record: ForwardRecord,
    pub labels: PseudoLabelSet,
    pub prototypes: PrototypeSet,
    pub split: SubsetSplit,
}

/// Pseudo-labels, prototypes, refined labels and split from one forward
/// pass of `model` over the target domain.
pub fn curriculum_round(model: &ModelParams, targets: &TargetView, tau_norm: f64) -> Result<CurriculumRound> {
    let record = forward(model, targets.inputs())?;
    let mut labels = PseudoLabelSet::from_probs(&record.probs);
    let prototypes = prototypes_from(record.features(), &record.probs)?;
    let refined = refine_labels(record.features(), &prototypes)?;
    labels.set_refined(&refined)?;
    let split = split_trustworthy(&labels, tau_norm)?;
    Ok(CurriculumRound {
        record,
        labels,
        prototypes,
        split,
    })
}

/// Writes `index,hard,refined,entropy_norm,subset` rows.
pub fn write_split_dump(path: &Path, pl: &PseudoLabelSet, split: &SubsetSplit) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut subset = vec!["ut"; pl.len()];
    for &i in &split.trustworthy {
        subset[i] = "tt";
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "index,hard,refined,entropy_norm,subset").map_err(io)?;
    for (i, l) in pl.labels.iter().enumerate() {
        let refined = l.refined.map(|r| r.to_string()).unwrap_or_default();
        writeln!(w, "{i},{},{refined},{},{}", l.hard, l.entropy_norm, subset[i]).map_err(io)?;
    }
    w.flush().map_err(io)
}
