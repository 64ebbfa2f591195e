use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::numerics::{RandomSource, RealMatrix};

/// Mixture of affine transforms used to draw the universal pretraining set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniversalConfig {
    /// Number of transforms `M` in the mixture.
    pub transforms: usize,
    /// Random extra rotation per transform, uniform in `±jitter`.
    pub rotation_jitter_deg: f64,
    /// Random extra translation per coordinate, uniform in `±jitter`.
    pub translation_jitter: f64,
}

impl Default for UniversalConfig {
    fn default() -> Self {
        Self {
            transforms: 12,
            rotation_jitter_deg: 10.0,
            translation_jitter: 0.3,
        }
    }
}

/// Gaussian class clusters plus the transform that maps the source domain
/// onto the target domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub classes: usize,
    pub input_dim: usize,
    /// Cluster centres sit on a circle of this radius in the first two
    /// coordinates.
    pub mean_radius: f64,
    /// Spread of the centres in the remaining coordinates.
    pub mean_spread: f64,
    pub cluster_std: f64,
    /// Seed for the centre layout, so every domain shares the same centres.
    pub layout_seed: u64,
    /// Explicit centres (`classes × input_dim`); overrides the layout.
    pub means: Option<Vec<Vec<f64>>>,
    /// Rotation of the first two coordinates, in degrees.
    pub rotation_deg: f64,
    /// Target translation; empty means zero.
    pub translation: Vec<f64>,
    /// Multiplier on the cluster spread in the target domain.
    pub noise_scale: f64,
    pub hard_classes: Vec<usize>,
    /// Extra target shift of the hard classes towards the centroid of all
    /// class centres, in units of `cluster_std`.
    pub hard_shift: f64,
    pub universal: UniversalConfig,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            input_dim: 8,
            mean_radius: 3.0,
            mean_spread: 1.0,
            cluster_std: 1.0,
            layout_seed: 7,
            means: None,
            rotation_deg: 30.0,
            translation: vec![0.5, -0.5, 0.5, 0.5, -0.5, 0.5, 0.5, -0.5],
            noise_scale: 1.3,
            hard_classes: vec![3],
            hard_shift: 2.5,
            universal: UniversalConfig::default(),
        }
    }
}

/// A concrete affine map applied to a cluster sample.
#[derive(Clone, Debug)]
struct Transform {
    angle: f64,
    translation: Vec<f64>,
    noise_scale: f64,
    hard_shift: f64,
}

impl ShiftConfig {
    /// A config whose target domain equals its source domain.
    pub fn identity(&self) -> Self {
        Self {
            rotation_deg: 0.0,
            translation: Vec::new(),
            noise_scale: 1.0,
            hard_classes: Vec::new(),
            hard_shift: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        if self.classes == 0 {
            return bad("classes", "must be at least 1".into());
        }
        if self.input_dim < 2 {
            return bad("input_dim", "must be at least 2".into());
        }
        if !(self.cluster_std > 0.0) {
            return bad("cluster_std", "must be positive".into());
        }
        if !(self.noise_scale > 0.0) {
            return bad("noise_scale", "must be positive".into());
        }
        if !self.mean_radius.is_finite() || !self.mean_spread.is_finite() || self.mean_spread < 0.0 {
            return bad("mean_radius", "radius and spread must be finite, spread non-negative".into());
        }
        if !self.translation.is_empty() && self.translation.len() != self.input_dim {
            return bad(
                "translation",
                format!("has {} entries, input_dim is {}", self.translation.len(), self.input_dim),
            );
        }
        if let Some(&k) = self.hard_classes.iter().find(|&&k| k >= self.classes) {
            return bad("hard_classes", format!("class {k} out of range"));
        }
        if !self.hard_classes.is_empty() && self.hard_shift < 2.0 {
            return bad("hard_shift", "must be at least 2 cluster standard deviations".into());
        }
        if let Some(m) = &self.means {
            if m.len() != self.classes || m.iter().any(|r| r.len() != self.input_dim) {
                return bad("means", "must be classes × input_dim".into());
            }
        }
        if self.universal.transforms == 0 {
            return bad("universal.transforms", "must be at least 1".into());
        }
        if self.universal.rotation_jitter_deg < 0.0 || self.universal.translation_jitter < 0.0 {
            return bad("universal", "jitters must be non-negative".into());
        }
        Ok(())
    }

    /// Cluster centres; a function of the config alone.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        if let Some(m) = &self.means {
            return m.clone();
        }
        let mut rng = RandomSource::new(self.layout_seed);
        (0..self.classes)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / self.classes as f64;
                let mut m = vec![self.mean_radius * a.cos(), self.mean_radius * a.sin()];
                m.extend((2..self.input_dim).map(|_| self.mean_spread * rng.normal()));
                m
            })
            .collect()
    }

    fn translation_vec(&self) -> Vec<f64> {
        if self.translation.is_empty() {
            vec![0.0; self.input_dim]
        } else {
            self.translation.clone()
        }
    }

    fn source_transform(&self) -> Transform {
        self.interpolated(0.0)
    }

    fn target_transform(&self) -> Transform {
        self.interpolated(1.0)
    }

    /// `t = 0` is the source domain, `t = 1` the target domain.
    fn interpolated(&self, t: f64) -> Transform {
        Transform {
            angle: t * self.rotation_deg.to_radians(),
            translation: self.translation_vec().iter().map(|v| t * v).collect(),
            noise_scale: 1.0 + t * (self.noise_scale - 1.0),
            hard_shift: t * self.hard_shift,
        }
    }

    /// Unit vector from centre `k` towards the centroid of all centres, so a
    /// shifted class drifts into the region where every class meets.
    fn hard_directions(&self, means: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = means.len() as f64;
        let dim = means.first().map_or(0, Vec::len);
        let centroid: Vec<f64> = (0..dim).map(|j| means.iter().map(|m| m[j]).sum::<f64>() / k).collect();
        means
            .iter()
            .map(|m| {
                let diff: Vec<f64> = centroid.iter().zip(m).map(|(a, b)| a - b).collect();
                let n = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    diff.iter().map(|v| v / n).collect()
                } else {
                    vec![0.0; diff.len()]
                }
            })
            .collect()
    }
}

struct Sampler<'a> {
    cfg: &'a ShiftConfig,
    means: Vec<Vec<f64>>,
    directions: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a ShiftConfig) -> Self {
        let means = cfg.class_means();
        let directions = cfg.hard_directions(&means);
        Self {
            cfg,
            means,
            directions,
        }
    }

    fn draw(&self, label: usize, tf: &Transform, rng: &mut RandomSource, out: &mut Vec<f64>) {
        let sigma = self.cfg.cluster_std * tf.noise_scale;
        let mut x: Vec<f64> = self.means[label]
            .iter()
            .map(|m| m + sigma * rng.normal())
            .collect();
        if self.cfg.hard_classes.contains(&label) {
            let shift = tf.hard_shift * self.cfg.cluster_std;
            for (v, d) in x.iter_mut().zip(&self.directions[label]) {
                *v += shift * d;
            }
        }
        let (s, c) = tf.angle.sin_cos();
        let (a, b) = (x[0], x[1]);
        x[0] = c * a - s * b;
        x[1] = s * a + c * b;
        for (v, t) in x.iter_mut().zip(&tf.translation) {
            *v += t;
        }
        out.extend_from_slice(&x);
    }

    fn dataset(&self, n: usize, domain: Domain, rng: &mut RandomSource, transforms: &[Transform]) -> Result<Dataset> {
        let k = self.cfg.classes;
        let mut data = Vec::with_capacity(n * self.cfg.input_dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.below(k);
            let tf = if transforms.len() == 1 {
                &transforms[0]
            } else {
                &transforms[rng.below(transforms.len())]
            };
            self.draw(label, tf, rng, &mut data);
            labels.push(label);
        }
        Dataset::new(RealMatrix::new(n, self.cfg.input_dim, data)?, labels, domain, k)
    }
}

/// Draws a labelled source domain and its shifted target domain.
pub fn generate_benchmark(
    cfg: &ShiftConfig,
    n_source: usize,
    n_target: usize,
    rng: &mut RandomSource,
) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    if n_source < cfg.classes || n_target < cfg.classes {
        return Err(Error::usage(format!(
            "need at least {} samples per domain",
            cfg.classes
        )));
    }
    let sampler = Sampler::new(cfg);
    let source = sampler.dataset(n_source, Domain::Source, rng, &[cfg.source_transform()])?;
    let target = sampler.dataset(n_target, Domain::Target, rng, &[cfg.target_transform()])?;
    Ok((source, target))
}

/// Draws from a mixture of `M` transforms spread between the source and the
/// target transform (evenly spaced interpolation plus random jitter).
pub fn generate_universal(cfg: &ShiftConfig, n: usize, rng: &mut RandomSource) -> Result<Dataset> {
    cfg.validate()?;
    if n < cfg.classes {
        return Err(Error::usage(format!("need at least {} samples", cfg.classes)));
    }
    let u = &cfg.universal;
    let m = u.transforms;
    let transforms: Vec<Transform> = (0..m)
        .map(|i| {
            let t = if m == 1 { 0.0 } else { i as f64 / (m - 1) as f64 };
            let mut tf = cfg.interpolated(t);
            tf.angle += u.rotation_jitter_deg.to_radians() * rng.uniform(-1.0, 1.0);
            for v in &mut tf.translation {
                *v += u.translation_jitter * rng.uniform(-1.0, 1.0);
            }
            tf
        })
        .collect();
    Sampler::new(cfg).dataset(n, Domain::Universal, rng, &transforms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_means(d: &Dataset) -> Vec<f64> {
        let n = d.len() as f64;
        (0..d.input_dim())
            .map(|c| d.inputs().row_iter().map(|r| r[c]).sum::<f64>() / n)
            .collect()
    }

    #[test]
    fn deterministic_from_seed() {
        let cfg = ShiftConfig::default();
        let a = generate_benchmark(&cfg, 100, 100, &mut RandomSource::new(3)).unwrap();
        let b = generate_benchmark(&cfg, 100, 100, &mut RandomSource::new(3)).unwrap();
        assert_eq!(a, b);
        let u1 = generate_universal(&cfg, 50, &mut RandomSource::new(3)).unwrap();
        let u2 = generate_universal(&cfg, 50, &mut RandomSource::new(3)).unwrap();
        assert_eq!(u1, u2);
    }

    #[test]
    fn class_priors_uniform() {
        let cfg = ShiftConfig::default();
        let (s, t) = generate_benchmark(&cfg, 4000, 4000, &mut RandomSource::new(1)).unwrap();
        for d in [&s, &t] {
            let n = d.len() as f64;
            let p = 1.0 / cfg.classes as f64;
            let sd = (n * p * (1.0 - p)).sqrt();
            for c in d.class_counts() {
                assert!((c as f64 - n * p).abs() < 4.0 * sd, "count {c}");
            }
        }
    }

    #[test]
    fn identity_shift_matches_source_moments() {
        let cfg = ShiftConfig::default().identity();
        let (s, t) = generate_benchmark(&cfg, 20_000, 20_000, &mut RandomSource::new(2)).unwrap();
        for (a, b) in column_means(&s).iter().zip(column_means(&t)) {
            assert!((a - b).abs() < 0.1, "{a} vs {b}");
        }
    }

    #[test]
    fn single_identity_transform_universal_is_source() {
        let mut cfg = ShiftConfig::default();
        cfg.universal = UniversalConfig {
            transforms: 1,
            rotation_jitter_deg: 0.0,
            translation_jitter: 0.0,
        };
        let (s, _) = generate_benchmark(&cfg, 20_000, 4, &mut RandomSource::new(5)).unwrap();
        let u = generate_universal(&cfg, 20_000, &mut RandomSource::new(6)).unwrap();
        for (a, b) in column_means(&s).iter().zip(column_means(&u)) {
            assert!((a - b).abs() < 0.1, "{a} vs {b}");
        }
    }

    #[test]
    fn hard_class_moves_towards_centroid() {
        let mut cfg = ShiftConfig::default();
        cfg.rotation_deg = 0.0;
        cfg.translation.clear();
        let (s, t) = generate_benchmark(&cfg, 8000, 8000, &mut RandomSource::new(9)).unwrap();
        let centroid = |d: &Dataset, k: usize| {
            let rows: Vec<&[f64]> = d.inputs().row_iter().zip(d.labels()).filter(|(_, &l)| l == k).map(|(r, _)| r).collect();
            (0..d.input_dim()).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64).collect::<Vec<_>>()
        };
        let (cs, ct) = (centroid(&s, 3), centroid(&t, 3));
        let moved = cs.iter().zip(&ct).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(moved >= 2.0 * cfg.cluster_std, "moved {moved}");
        let means = cfg.class_means();
        let centre: Vec<f64> = (0..cfg.input_dim).map(|j| means.iter().map(|m| m[j]).sum::<f64>() / 4.0).collect();
        let dist = |p: &[f64]| p.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist(&ct) < dist(&cs) - 1.5);
    }

    #[test]
    fn validation_names_field() {
        let cfg = ShiftConfig { classes: 0, ..Default::default() };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("classes"), "{msg}");
        let cfg = ShiftConfig { hard_classes: vec![9], ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("hard_classes"));
        let cfg = ShiftConfig { noise_scale: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(generate_benchmark(&ShiftConfig::default(), 2, 100, &mut RandomSource::new(0)).is_err());
    }

    #[test]
    fn json_defaults_fill_missing_fields() {
        let cfg: ShiftConfig = serde_json::from_str(r#"{"classes": 3, "hard_classes": [1]}"#).unwrap();
        assert_eq!(cfg.classes, 3);
        assert_eq!(cfg.input_dim, 8);
        assert!(serde_json::from_str::<ShiftConfig>(r#"{"clases": 3}"#).is_err());
    }
}
