//! The default benchmark pipeline: generate the three domains, pretrain the
//! universal model, then pretrain the source model from the universal
//! extractor. Every step draws from its own stream of the seed.

use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt, adapt_baseline, AdaptContext, AdaptationConfig, AdaptationOutcome};
use crate::data::{
    evaluate, generate_benchmark, generate_universal, pretrain, Dataset, GroundTruth, PretrainConfig,
    PretrainOutcome, ShiftConfig, TargetView,
};
use crate::error::Result;
use crate::model::{Dense, ModelParams};
use crate::numerics::RandomSource;

pub const BENCHMARK_STREAM: u64 = 101;
pub const UNIVERSAL_DATA_STREAM: u64 = 102;
pub const UNIVERSAL_PRETRAIN_STREAM: u64 = 103;
pub const SOURCE_PRETRAIN_STREAM: u64 = 104;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSizes {
    pub source: usize,
    pub target: usize,
    pub universal: usize,
}

impl Default for BenchmarkSizes {
    fn default() -> Self {
        Self {
            source: 800,
            target: 800,
            universal: 2400,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Domains {
    pub source: Dataset,
    pub target: Dataset,
    pub universal: Dataset,
}

pub fn generate_domains(shift: &ShiftConfig, sizes: &BenchmarkSizes, seed: u64) -> Result<Domains> {
    let root = RandomSource::new(seed);
    let (source, target) = generate_benchmark(shift, sizes.source, sizes.target, &mut root.derive(BENCHMARK_STREAM))?;
    let universal = generate_universal(shift, sizes.universal, &mut root.derive(UNIVERSAL_DATA_STREAM))?;
    Ok(Domains { source, target, universal })
}

/// Pretrains on `data`. With `init_extractor` this is the source model,
/// otherwise the universal model; each uses its own stream of `seed`.
pub fn pretrain_model(
    data: &Dataset,
    cfg: &PretrainConfig,
    init_extractor: Option<&[Dense]>,
    seed: u64,
) -> Result<PretrainOutcome> {
    let stream = if init_extractor.is_some() {
        SOURCE_PRETRAIN_STREAM
    } else {
        UNIVERSAL_PRETRAIN_STREAM
    };
    pretrain(data, cfg, init_extractor, &mut RandomSource::new(seed).derive(stream))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub shift: ShiftConfig,
    pub sizes: BenchmarkSizes,
    pub universal_pretrain: PretrainConfig,
    pub source_pretrain: PretrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            shift: ShiftConfig::default(),
            sizes: BenchmarkSizes::default(),
            universal_pretrain: PretrainConfig::default(),
            source_pretrain: PretrainConfig { epochs: 5, ..PretrainConfig::default() },
        }
    }
}

/// Domains plus both pretrained models for one seed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub domains: Domains,
    pub universal_model: ModelParams,
    pub source_model: ModelParams,
    pub source_train_accuracy: f64,
}

impl Prepared {
    pub fn new(cfg: &PipelineConfig, seed: u64) -> Result<Self> {
        let domains = generate_domains(&cfg.shift, &cfg.sizes, seed)?;
        let universal = pretrain_model(&domains.universal, &cfg.universal_pretrain, None, seed)?;
        let source = pretrain_model(
            &domains.source,
            &cfg.source_pretrain,
            Some(universal.params.extractor()),
            seed,
        )?;
        Ok(Self {
            domains,
            universal_model: universal.params,
            source_model: source.params,
            source_train_accuracy: source.train_accuracy,
        })
    }

    /// The label-free target view and the evaluation oracle, with the
    /// shifted classes tracked.
    pub fn target_split(&self, shift: &ShiftConfig) -> (TargetView, GroundTruth) {
        let (view, truth) = self.domains.target.split_labels();
        (view, truth.with_tracked_classes(&shift.hard_classes))
    }

    pub fn source_only_accuracy(&self) -> Result<f64> {
        Ok(evaluate(&self.source_model, &self.domains.target)?.accuracy)
    }

    pub fn adapt(&self, shift: &ShiftConfig, cfg: &AdaptationConfig) -> Result<AdaptationOutcome> {
        let (view, truth) = self.target_split(shift);
        adapt(&AdaptContext {
            source: &self.source_model,
            universal: self.universal_model.extractor(),
            target: &view,
            truth: Some(&truth),
            cfg,
        })
    }

    pub fn baseline(&self, shift: &ShiftConfig, cfg: &AdaptationConfig) -> Result<AdaptationOutcome> {
        let (view, truth) = self.target_split(shift);
        adapt_baseline(&self.source_model, &view, Some(&truth), cfg)
    }
}
