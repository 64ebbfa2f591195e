use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{RandomSource, RealMatrix};

pub const CHECKPOINT_FORMAT: &str = "sfda-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Fully connected layer; `weight` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: RealMatrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: RealMatrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut RandomSource) -> Self {
        let a = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output).map(|_| rng.uniform(-a, a)).collect();
        Self {
            weight: RealMatrix::new(output, input, data).expect("finite glorot weights"),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Parameters of extractor plus classifier. Layer shapes are validated on
/// construction, so any two values with equal [`layer_dims`](Self::layer_dims)
/// can be combined element-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    extractor: Vec<Dense>,
    classifier: Dense,
}

impl ModelParams {
    pub fn from_parts(extractor: Vec<Dense>, classifier: Dense) -> Result<Self> {
        if extractor.is_empty() {
            return Err(Error::usage("extractor needs at least one layer"));
        }
        for (i, layer) in extractor.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::usage(format!("extractor layer {i}: bias length mismatch")));
            }
            if i > 0 && extractor[i - 1].output_dim() != layer.input_dim() {
                return Err(Error::usage(format!(
                    "extractor layer {i} expects {} inputs but previous layer emits {}",
                    layer.input_dim(),
                    extractor[i - 1].output_dim()
                )));
            }
        }
        let d = extractor.last().unwrap().output_dim();
        if classifier.input_dim() != d {
            return Err(Error::usage(format!(
                "classifier expects {} features but extractor emits {d}",
                classifier.input_dim()
            )));
        }
        if classifier.bias.len() != classifier.output_dim() {
            return Err(Error::usage("classifier bias length mismatch"));
        }
        Ok(Self {
            extractor,
            classifier,
        })
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 3 {
            return Err(Error::usage(
                "layer dims need at least input, feature and class counts",
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::usage("layer dims must be positive"));
        }
        Ok(())
    }

    /// All-zero parameters for `dims = [D_in, hidden.., d, K]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        let n = dims.len();
        let extractor = dims[..n - 1]
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Self::from_parts(extractor, Dense::zeros(dims[n - 2], dims[n - 1]))
    }

    pub fn init(dims: &[usize], rng: &mut RandomSource) -> Result<Self> {
        Self::check_dims(dims)?;
        let n = dims.len();
        let extractor = dims[..n - 1]
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        let classifier = Dense::glorot(dims[n - 2], dims[n - 1], rng);
        Self::from_parts(extractor, classifier)
    }

    /// `[D_in, hidden.., d, K]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.extractor[0].input_dim()];
        dims.extend(self.extractor.iter().map(Dense::output_dim));
        dims.push(self.classifier.output_dim());
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.extractor[0].input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.input_dim()
    }

    pub fn classes(&self) -> usize {
        self.classifier.output_dim()
    }

    pub fn extractor(&self) -> &[Dense] {
        &self.extractor
    }

    pub fn classifier(&self) -> &Dense {
        &self.classifier
    }

    pub fn extractor_mut(&mut self) -> &mut [Dense] {
        &mut self.extractor
    }

    pub fn classifier_mut(&mut self) -> &mut Dense {
        &mut self.classifier
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layer_dims()).expect("dims of a valid model")
    }

    /// Parameter tensors in a fixed order: extractor layers (weight, bias),
    /// then classifier (weight, bias).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.extractor.len() + 2);
        for l in self.extractor.iter().chain(std::iter::once(&self.classifier)) {
            out.push(l.weight.data());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.extractor.len() + 2);
        for l in self
            .extractor
            .iter_mut()
            .chain(std::iter::once(&mut self.classifier))
        {
            out.push(l.weight.data_mut());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        if flat.len() != p.num_params() {
            return Err(Error::usage(format!(
                "expected {} parameters, got {}",
                p.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for t in p.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(p)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layer_dims() == other.layer_dims()
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::usage("parameter shapes differ"));
        }
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    extractor: Vec<LayerDoc>,
    classifier: LayerDoc,
}

fn layer_doc(l: &Dense) -> LayerDoc {
    LayerDoc {
        weight: l.weight.data().to_vec(),
        bias: l.bias.clone(),
    }
}

impl ModelParams {
    pub fn to_json(&self) -> String {
        let doc = CheckpointDoc {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layer_dims: self.layer_dims(),
            extractor: self.extractor.iter().map(layer_doc).collect(),
            classifier: layer_doc(&self.classifier),
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(text)?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("not a checkpoint: format {:?}", doc.format)));
        }
        if doc.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", doc.version)));
        }
        Self::check_dims(&doc.layer_dims)?;
        let dims = &doc.layer_dims;
        let n = dims.len();
        if doc.extractor.len() != n - 2 {
            return Err(Error::Config("extractor layer count does not match layer_dims".into()));
        }
        let build = |l: LayerDoc, input: usize, output: usize| -> Result<Dense> {
            Ok(Dense {
                weight: RealMatrix::new(output, input, l.weight)?,
                bias: l.bias,
            })
        };
        let mut extractor = Vec::with_capacity(n - 2);
        for (i, l) in doc.extractor.into_iter().enumerate() {
            extractor.push(build(l, dims[i], dims[i + 1])?);
        }
        let classifier = build(doc.classifier, dims[n - 2], dims[n - 1])?;
        Self::from_parts(extractor, classifier)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, params.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelParams::from_json(&text)
}
