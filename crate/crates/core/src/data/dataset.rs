use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
    Universal,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Source => "source",
            Domain::Target => "target",
            Domain::Universal => "universal",
        })
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            "universal" => Ok(Domain::Universal),
            other => Err(format!("unknown domain {other:?}")),
        }
    }
}

/// Labelled samples of one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: RealMatrix,
    labels: Vec<usize>,
    domain: Domain,
    classes: usize,
}

impl Dataset {
    pub fn new(inputs: RealMatrix, labels: Vec<usize>, domain: Domain, classes: usize) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(Error::usage(format!(
                "{} labels for {} samples",
                labels.len(),
                inputs.rows()
            )));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::usage(format!("sample {i} has label {l} >= {classes} classes")));
        }
        Ok(Self {
            inputs,
            labels,
            domain,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &RealMatrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Separates the inputs an adaptation run may see from the labels only an
    /// evaluator may consult.
    pub fn split_labels(&self) -> (TargetView, GroundTruth) {
        (
            TargetView {
                inputs: self.inputs.clone(),
                classes: self.classes,
            },
            GroundTruth {
                labels: self.labels.clone(),
                classes: self.classes,
                tracked: Vec::new(),
            },
        )
    }

    pub fn unlabeled_view(&self) -> TargetView {
        TargetView {
            inputs: self.inputs.clone(),
            classes: self.classes,
        }
    }
}

/// Label-free view of a target domain.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetView {
    inputs: RealMatrix,
    classes: usize,
}

impl TargetView {
    pub fn new(inputs: RealMatrix, classes: usize) -> Self {
        Self { inputs, classes }
    }

    pub fn inputs(&self) -> &RealMatrix {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

/// Evaluation-only access to hidden labels. Exposes aggregate statistics,
/// never the labels themselves.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    labels: Vec<usize>,
    classes: usize,
    tracked: Vec<usize>,
}

impl GroundTruth {
    /// Classes whose noise rate is reported separately (the "hard" classes).
    pub fn with_tracked_classes(mut self, classes: &[usize]) -> Self {
        self.tracked = classes.to_vec();
        self
    }

    pub fn tracked_classes(&self) -> &[usize] {
        &self.tracked
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn check(&self, predictions: &[usize]) {
        assert_eq!(predictions.len(), self.labels.len(), "one prediction per sample");
    }

    pub fn accuracy(&self, predictions: &[usize]) -> f64 {
        self.check(predictions);
        if self.labels.is_empty() {
            return 0.0;
        }
        let hits = predictions.iter().zip(&self.labels).filter(|(p, l)| p == l).count();
        hits as f64 / self.labels.len() as f64
    }

    /// Accuracy within each true class; `None` for classes with no samples.
    pub fn per_class_accuracy(&self, predictions: &[usize]) -> Vec<Option<f64>> {
        self.check(predictions);
        let mut hit = vec![0usize; self.classes];
        let mut tot = vec![0usize; self.classes];
        for (&p, &l) in predictions.iter().zip(&self.labels) {
            tot[l] += 1;
            hit[l] += usize::from(p == l);
        }
        hit.iter()
            .zip(&tot)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect()
    }

    /// Fraction of `assigned[i]` that disagree with the true label of
    /// sample `indices[i]`.
    pub fn noise_rate(&self, indices: &[usize], assigned: &[usize]) -> Option<f64> {
        assert_eq!(indices.len(), assigned.len());
        if indices.is_empty() {
            return None;
        }
        let wrong = indices
            .iter()
            .zip(assigned)
            .filter(|(&i, &a)| self.labels[i] != a)
            .count();
        Some(wrong as f64 / indices.len() as f64)
    }

    /// Noise rate over every sample; `assigned` has one label per sample.
    pub fn full_noise_rate(&self, assigned: &[usize]) -> f64 {
        self.check(assigned);
        1.0 - self.accuracy(assigned)
    }

    /// Noise rate restricted to samples whose true class is tracked.
    pub fn tracked_noise_rate(&self, assigned: &[usize]) -> Option<f64> {
        self.check(assigned);
        let idx: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.tracked.contains(&self.labels[i]))
            .collect();
        let sub: Vec<usize> = idx.iter().map(|&i| assigned[i]).collect();
        self.noise_rate(&idx, &sub)
    }
}

fn header(dim: usize) -> String {
    let mut h: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    h.push("label".into());
    h.push("domain".into());
    h.join(",")
}

/// Writes `f0,..,f{D-1},label,domain`. Floats use the shortest decimal form
/// that parses back to the same value.
pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header(data.input_dim())).map_err(io)?;
    for (row, label) in data.inputs.row_iter().zip(&data.labels) {
        for v in row {
            write!(w, "{v},").map_err(io)?;
        }
        writeln!(w, "{label},{}", data.domain).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a dataset CSV. With `classes = None` the class count is one more
/// than the largest label.
pub fn load_dataset(path: &Path, classes: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let head = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(1, "empty file, expected a header".into())),
    };
    let cols: Vec<&str> = head.trim_end().split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "label" || cols[cols.len() - 1] != "domain" {
        return Err(parse_err(1, "header must be f0,..,f{D-1},label,domain".into()));
    }
    let dim = cols.len() - 2;
    if cols[..dim].iter().enumerate().any(|(i, c)| *c != format!("f{i}")) {
        return Err(parse_err(1, "feature columns must be named f0, f1, ...".into()));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut domain = None;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != dim + 2 {
            return Err(parse_err(lineno, format!("expected {} fields, found {}", dim + 2, fields.len())));
        }
        for f in &fields[..dim] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad number {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {f:?}")));
            }
            data.push(v);
        }
        let label: usize = fields[dim]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label {:?}", fields[dim])))?;
        if let Some(k) = classes {
            if label >= k {
                return Err(parse_err(lineno, format!("row {} has label {label} >= {k} classes", lineno - 1)));
            }
        }
        let d: Domain = fields[dim + 1].parse().map_err(|e| parse_err(lineno, e))?;
        match domain {
            None => domain = Some(d),
            Some(prev) if prev != d => {
                return Err(parse_err(lineno, format!("domain {d} differs from earlier rows ({prev})")))
            }
            _ => {}
        }
        labels.push(label);
    }
    let Some(domain) = domain else {
        return Err(parse_err(2, "no data rows".into()));
    };
    let k = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let inputs = RealMatrix::new(labels.len(), dim, data)?;
    Dataset::new(inputs, labels, domain, k)
}
