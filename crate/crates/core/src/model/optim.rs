use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::usage(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::usage(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::usage("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// One momentum-SGD update of a flat parameter slice:
/// `v ← m·v + (g + wd·p)`, `p ← p − lr·v`.
pub fn sgd_update(params: &mut [f64], grads: &[f64], velocity: &mut [f64], cfg: &SgdConfig) {
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        let g = g + cfg.weight_decay * *p;
        *v = cfg.momentum * *v + g;
        *p -= cfg.lr * *v;
    }
}

/// Momentum SGD holding its own velocity buffer.
#[derive(Clone, Debug)]
pub struct Sgd {
    cfg: SgdConfig,
    velocity: Option<ModelParams>,
}

impl Sgd {
    pub fn new(cfg: SgdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            velocity: None,
        })
    }

    pub fn config(&self) -> &SgdConfig {
        &self.cfg
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        if !params.same_shape(grads) {
            return Err(Error::usage("gradient shape does not match parameters"));
        }
        let velocity = self.velocity.get_or_insert_with(|| params.zeros_like());
        if !velocity.same_shape(params) {
            return Err(Error::usage("optimizer state belongs to a different model shape"));
        }
        for ((p, g), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(velocity.tensors_mut())
        {
            sgd_update(p, g, v, &self.cfg);
        }
        if !params.all_finite() {
            return Err(Error::Numeric("parameters diverged to a non-finite value".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    fn plain(lr: f64) -> SgdConfig {
        SgdConfig { lr, momentum: 0.0, weight_decay: 0.0 }
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = ModelParams::init(&[3, 4, 2], &mut RandomSource::new(1)).unwrap();
        let before = p.clone();
        let mut opt = Sgd::new(SgdConfig { weight_decay: 0.0, ..Default::default() }).unwrap();
        opt.step(&mut p, &before.zeros_like()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn scalar_step() {
        let (mut w, mut v) = ([1.0], [0.0]);
        sgd_update(&mut w, &[1.0], &mut v, &plain(0.1));
        assert!((w[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_recurrence() {
        let cfg = SgdConfig { lr: 0.1, momentum: 0.9, weight_decay: 0.0 };
        let (mut w, mut v) = ([0.0], [0.0]);
        sgd_update(&mut w, &[1.0], &mut v, &cfg);
        assert!((w[0] + 0.1).abs() < 1e-15);
        let before = w[0];
        sgd_update(&mut w, &[1.0], &mut v, &cfg);
        assert!((before - w[0] - 0.19).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks() {
        let cfg = SgdConfig { lr: 0.1, momentum: 0.0, weight_decay: 0.5 };
        let (mut w, mut v) = ([2.0], [0.0]);
        sgd_update(&mut w, &[0.0], &mut v, &cfg);
        assert!((w[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn invalid_lr_rejected() {
        assert!(Sgd::new(plain(0.0)).is_err());
        assert!(Sgd::new(plain(-1.0)).is_err());
    }
}
