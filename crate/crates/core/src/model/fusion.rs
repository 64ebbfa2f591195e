use super::params::{Dense, ModelParams};
use crate::error::{Error, Result};

/// Element-wise convex combination `β·student + (1−β)·previous`.
///
/// The endpoints return exact copies, so `β = 0` reproduces `previous`
/// bit-for-bit (signed zeros included).
pub fn fuse_parameters(student: &ModelParams, previous: &ModelParams, beta: f64) -> Result<ModelParams> {
    if !student.same_shape(previous) {
        return Err(Error::usage(format!(
            "cannot fuse models with layer dims {:?} and {:?}",
            student.layer_dims(),
            previous.layer_dims()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::usage(format!("fusion coefficient {beta} outside [0, 1]")));
    }
    if beta == 0.0 {
        return Ok(previous.clone());
    }
    if beta == 1.0 {
        return Ok(student.clone());
    }
    let mut out = previous.clone();
    for (o, s) in out.tensors_mut().into_iter().zip(student.tensors()) {
        for (x, y) in o.iter_mut().zip(s) {
            *x = beta * y + (1.0 - beta) * *x;
        }
    }
    Ok(out)
}

/// Fresh student built from an extractor and a classifier taken from
/// (possibly) different models. The result owns deep copies.
pub fn init_student(extractor: &[Dense], classifier: &Dense) -> Result<ModelParams> {
    let d = extractor.last().map(Dense::output_dim).unwrap_or(0);
    if d != classifier.input_dim() {
        return Err(Error::usage(format!(
            "extractor emits {d} features but the classifier expects {}",
            classifier.input_dim()
        )));
    }
    ModelParams::from_parts(extractor.to_vec(), classifier.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, loss_and_gradients, LossSpec, Sgd, SgdConfig};
    use crate::numerics::{RandomSource, RealMatrix};
    use proptest::prelude::*;

    fn pair(seed: u64) -> (ModelParams, ModelParams) {
        let mut rng = RandomSource::new(seed);
        let a = ModelParams::init(&[4, 5, 3, 2], &mut rng).unwrap();
        let b = ModelParams::init(&[4, 5, 3, 2], &mut rng).unwrap();
        (a, b)
    }

    #[test]
    fn endpoints_are_exact() {
        let (s, p) = pair(1);
        assert_eq!(fuse_parameters(&s, &p, 0.0).unwrap(), p);
        assert_eq!(fuse_parameters(&s, &p, 1.0).unwrap(), s);
    }

    #[test]
    fn scalar_arithmetic() {
        let one = ModelParams::from_flat(&[1, 1, 1], &[1.0; 4]).unwrap();
        let zero = ModelParams::zeros(&[1, 1, 1]).unwrap();
        let f = fuse_parameters(&one, &zero, 0.4).unwrap();
        assert!(f.to_flat().iter().all(|v| (v - 0.4).abs() <= 1e-15));
    }

    #[test]
    fn shape_and_range_checked() {
        let (s, _) = pair(2);
        let other = ModelParams::zeros(&[4, 6, 3, 2]).unwrap();
        assert!(fuse_parameters(&s, &other, 0.5).is_err());
        assert!(fuse_parameters(&s, &s, 1.5).is_err());
    }

    #[test]
    fn student_takes_universal_features() {
        let (universal, source) = pair(3);
        let student = init_student(universal.extractor(), source.classifier()).unwrap();
        let x = RealMatrix::from_rows(&[[0.1, 0.2, -0.3, 0.5], [1.0, -1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(
            forward(&student, &x).unwrap().features(),
            forward(&universal, &x).unwrap().features()
        );
        assert_eq!(student.classifier(), source.classifier());
        assert_eq!(init_student(universal.extractor(), source.classifier()).unwrap(), student);
    }

    #[test]
    fn student_is_a_copy() {
        let (universal, source) = pair(4);
        let keep = universal.clone();
        let mut student = init_student(universal.extractor(), source.classifier()).unwrap();
        let x = RealMatrix::from_rows(&[[0.1, 0.2, -0.3, 0.5]]).unwrap();
        let (_, g) = loss_and_gradients(&student, &x, None, LossSpec::entropy_only()).unwrap();
        Sgd::new(SgdConfig { lr: 0.5, ..Default::default() })
            .unwrap()
            .step(&mut student, &g)
            .unwrap();
        assert_ne!(student.extractor(), keep.extractor());
        assert_eq!(universal, keep);
    }

    #[test]
    fn dim_mismatch() {
        let (universal, _) = pair(5);
        assert!(init_student(universal.extractor(), &Dense::zeros(4, 2)).is_err());
    }

    proptest! {
        #[test]
        fn fusion_is_elementwise(seed in 0u64..1000, beta in 0.0f64..=1.0) {
            let (s, p) = pair(seed);
            let f = fuse_parameters(&s, &p, beta).unwrap();
            for ((o, a), b) in f.to_flat().iter().zip(s.to_flat()).zip(p.to_flat()) {
                prop_assert!((o - (beta * a + (1.0 - beta) * b)).abs() <= 1e-15);
            }
        }
    }
}
