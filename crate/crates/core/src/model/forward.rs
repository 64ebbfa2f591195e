use super::params::{Dense, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{ProbVector, RealMatrix};
use crate::numerics::prob::softmax_unchecked;

/// Everything a forward pass produces, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardRecord {
    /// `activations[0]` is the input batch; `activations[l]` the tanh output
    /// of extractor layer `l`. The last entry is the feature matrix `g(x)`.
    pub activations: Vec<RealMatrix>,
    pub logits: RealMatrix,
    pub probs: Vec<ProbVector>,
}

impl ForwardRecord {
    pub fn features(&self) -> &RealMatrix {
        self.activations.last().expect("at least the input")
    }

    /// Hard predictions, lowest index on ties.
    pub fn predictions(&self) -> Vec<usize> {
        self.probs.iter().map(ProbVector::argmax).collect()
    }
}

/// `x · Wᵀ + b`
fn affine(layer: &Dense, x: &RealMatrix) -> Result<RealMatrix> {
    let mut out = x.matmul_transpose(&layer.weight)?;
    for r in 0..out.rows() {
        for (v, b) in out.row_mut(r).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(out)
}

/// Runs the extractor and returns `[input, h_1, .., features]`.
pub(crate) fn extract(params: &ModelParams, inputs: &RealMatrix) -> Result<Vec<RealMatrix>> {
    if inputs.cols() != params.input_dim() {
        return Err(Error::usage(format!(
            "input has {} columns but the model expects {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    let mut acts = Vec::with_capacity(params.extractor().len() + 1);
    acts.push(inputs.clone());
    for layer in params.extractor() {
        let mut z = affine(layer, acts.last().unwrap())?;
        for v in z.data_mut() {
            *v = v.tanh();
        }
        acts.push(z);
    }
    Ok(acts)
}

pub(crate) fn classifier_logits(
    classifier: &Dense,
    features: &RealMatrix,
) -> Result<(RealMatrix, Vec<ProbVector>)> {
    let logits = affine(classifier, features)?;
    if !logits.all_finite() {
        return Err(Error::Numeric("logits are not finite".into()));
    }
    let probs = logits
        .row_iter()
        .map(|row| ProbVector::new(softmax_unchecked(row)))
        .collect::<Result<Vec<_>>>()?;
    Ok((logits, probs))
}

pub fn forward(params: &ModelParams, inputs: &RealMatrix) -> Result<ForwardRecord> {
    let activations = extract(params, inputs)?;
    let (logits, probs) = classifier_logits(params.classifier(), activations.last().unwrap())?;
    Ok(ForwardRecord {
        activations,
        logits,
        probs,
    })
}

/// Hard class predictions for a batch.
pub fn predict(params: &ModelParams, inputs: &RealMatrix) -> Result<Vec<usize>> {
    Ok(forward(params, inputs)?.predictions())
}

/// Accumulates classifier gradients for upstream `d_logits` into `grad` and
/// returns `∂L/∂features`.
pub(crate) fn classifier_backward(
    classifier: &Dense,
    features: &RealMatrix,
    d_logits: &RealMatrix,
    grad: &mut Dense,
) -> RealMatrix {
    let (k, d) = (classifier.output_dim(), classifier.input_dim());
    let mut d_features = RealMatrix::zeros(features.rows(), d);
    for r in 0..features.rows() {
        let f = features.row(r);
        let g = d_logits.row(r);
        let df = d_features.row_mut(r);
        for j in 0..k {
            let gj = g[j];
            if gj == 0.0 {
                continue;
            }
            grad.bias[j] += gj;
            let w = classifier.weight.row(j);
            let gw = grad.weight.row_mut(j);
            for i in 0..d {
                gw[i] += gj * f[i];
                df[i] += gj * w[i];
            }
        }
    }
    d_features
}

/// Backpropagates `∂L/∂features` through the tanh layers, accumulating into
/// the extractor part of `grads`.
pub(crate) fn extractor_backward(
    params: &ModelParams,
    activations: &[RealMatrix],
    d_features: RealMatrix,
    grads: &mut ModelParams,
) {
    let mut upstream = d_features;
    let layers = params.extractor();
    for l in (0..layers.len()).rev() {
        let out = &activations[l + 1];
        let inp = &activations[l];
        let layer = &layers[l];
        let gl = &mut grads.extractor_mut()[l];
        let mut d_in = RealMatrix::zeros(inp.rows(), inp.cols());
        for r in 0..inp.rows() {
            let a = out.row(r);
            let u = upstream.row(r);
            let x = inp.row(r);
            let dx = d_in.row_mut(r);
            for j in 0..layer.output_dim() {
                let dz = u[j] * (1.0 - a[j] * a[j]);
                if dz == 0.0 {
                    continue;
                }
                gl.bias[j] += dz;
                let w = layer.weight.row(j);
                let gw = gl.weight.row_mut(j);
                for i in 0..layer.input_dim() {
                    gw[i] += dz * x[i];
                    dx[i] += dz * w[i];
                }
            }
        }
        upstream = d_in;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    #[test]
    fn zero_model_is_uniform() {
        let p = ModelParams::zeros(&[5, 4, 3, 4]).unwrap();
        let x = RealMatrix::new(3, 5, (0..15).map(f64::from).collect()).unwrap();
        let rec = forward(&p, &x).unwrap();
        assert!(rec.logits.data().iter().all(|&v| v == 0.0));
        for pr in &rec.probs {
            assert_eq!(pr.as_slice(), &[0.25; 4]);
        }
        assert_eq!(rec.predictions(), vec![0, 0, 0]);
    }

    #[test]
    fn identity_extractor_gives_tanh_of_inputs() {
        let ext = Dense {
            weight: RealMatrix::identity(3),
            bias: vec![0.0; 3],
        };
        let p = ModelParams::from_parts(vec![ext], Dense::zeros(3, 2)).unwrap();
        let x = RealMatrix::from_rows(&[[0.5, -1.0, 2.0], [0.0, 3.0, -0.25]]).unwrap();
        let rec = forward(&p, &x).unwrap();
        for (f, v) in rec.features().data().iter().zip(x.data()) {
            assert_eq!(*f, v.tanh());
        }
    }

    #[test]
    fn random_batch_probs_normalized_and_deterministic() {
        let mut rng = RandomSource::new(17);
        let p = ModelParams::init(&[6, 32, 16, 4], &mut rng).unwrap();
        let x = RealMatrix::new(8, 6, (0..48).map(|_| rng.normal() * 3.0).collect()).unwrap();
        let a = forward(&p, &x).unwrap();
        for pr in &a.probs {
            assert!((pr.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let b = forward(&p, &x).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.features(), b.features());
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let p = ModelParams::zeros(&[5, 3, 2]).unwrap();
        let x = RealMatrix::zeros(2, 4);
        assert!(matches!(forward(&p, &x), Err(Error::Usage(_))));
    }
}
