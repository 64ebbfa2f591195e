use crate::curriculum::{curriculum_round, PseudoLabelSet, SubsetSplit};
use crate::data::{GroundTruth, TargetView};
use crate::error::{Error, Result};
use crate::mixup::{build_batch, inter_pairs, intra_pairs, mix_loss, restricted_alpha, MixKind, MixPair, MixPool, MixRatio};
use crate::model::{
    fuse_parameters, init_student, loss_and_gradients, predict, BetaSchedule, Dense, LossSpec, ModelParams,
    Sgd,
};
use crate::numerics::{ProbVector, RandomSource, RealMatrix};

use super::config::AdaptationConfig;
use super::metrics::{EpochMetrics, MetricsLog};

/// RNG stream for mini-batch order.
pub(crate) const SHUFFLE_STREAM: u64 = 1;
/// RNG stream for mixing pairs and ratios.
pub(crate) const MIX_STREAM: u64 = 2;

/// Everything an adaptation run reads but never mutates.
#[derive(Clone, Copy)]
pub struct AdaptContext<'a> {
    /// The source model `θ_s`.
    pub source: &'a ModelParams,
    /// The universal extractor `g_*`.
    pub universal: &'a [Dense],
    pub target: &'a TargetView,
    /// Labels for metrics only. Training never reads them.
    pub truth: Option<&'a GroundTruth>,
    pub cfg: &'a AdaptationConfig,
}

impl AdaptContext<'_> {
    fn check(&self) -> Result<()> {
        self.cfg.validate_fields()?;
        if self.target.is_empty() {
            return Err(Error::usage("target set is empty"));
        }
        if self.target.classes() != self.source.classes() {
            return Err(Error::usage(format!(
                "target has {} classes, source model {}",
                self.target.classes(),
                self.source.classes()
            )));
        }
        if self.target.inputs().cols() != self.source.input_dim() {
            return Err(Error::usage(format!(
                "target inputs have dimension {}, source model expects {}",
                self.target.inputs().cols(),
                self.source.input_dim()
            )));
        }
        let shapes = |l: &[Dense]| l.iter().map(|d| (d.input_dim(), d.output_dim())).collect::<Vec<_>>();
        if shapes(self.universal) != shapes(self.source.extractor()) {
            return Err(Error::usage(format!(
                "universal extractor layers {:?} differ from source extractor layers {:?}",
                shapes(self.universal),
                shapes(self.source.extractor())
            )));
        }
        if let Some(t) = self.truth {
            if t.len() != self.target.len() {
                return Err(Error::usage(format!(
                    "{} ground-truth labels for {} target samples",
                    t.len(),
                    self.target.len()
                )));
            }
        }
        Ok(())
    }
}

/// Samples and the labels they are trained against.
#[derive(Clone, Debug)]
pub struct TrainingSubset {
    pub inputs: RealMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl TrainingSubset {
    pub fn select(target: &TargetView, indices: &[usize], labels: &[usize]) -> Self {
        Self {
            inputs: target.inputs().select_rows(indices),
            labels: indices.iter().map(|&i| labels[i]).collect(),
            classes: target.classes(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One pass over `subset` in shuffled mini-batches. `extra` may add a
/// gradient at each step; it gets the step index, the step count and the
/// current parameters. Returns the mean base loss per step.
pub(crate) fn train_pass(
    student: &mut ModelParams,
    opt: &mut Sgd,
    subset: &TrainingSubset,
    spec: LossSpec,
    batch_size: usize,
    rng: &mut RandomSource,
    mut extra: impl FnMut(usize, usize, &ModelParams) -> Result<Option<ModelParams>>,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..subset.len()).collect();
    rng.shuffle(&mut order);
    let steps = order.len().div_ceil(batch_size);
    let mut total = 0.0;
    for (step, batch) in order.chunks(batch_size).enumerate() {
        let x = subset.inputs.select_rows(batch);
        let t: Vec<ProbVector> = batch
            .iter()
            .map(|&i| ProbVector::one_hot(subset.labels[i], subset.classes))
            .collect();
        let (loss, mut g) = loss_and_gradients(student, &x, Some(&t), spec)?;
        if let Some(more) = extra(step, steps, student)? {
            g.add_scaled(&more, 1.0)?;
        }
        opt.step(student, &g)?;
        total += loss;
    }
    Ok(total / steps.max(1) as f64)
}

/// Trains the student on the curriculum loss over the trustworthy subset
/// for `student_epochs` passes. `None` when the subset is empty.
pub fn student_phase(
    student: &mut ModelParams,
    opt: &mut Sgd,
    tt: &TrainingSubset,
    cfg: &AdaptationConfig,
    rng: &mut RandomSource,
) -> Result<Option<f64>> {
    if tt.is_empty() {
        return Ok(None);
    }
    let mut last = 0.0;
    for _ in 0..cfg.student_epochs {
        last = train_pass(student, opt, tt, LossSpec::student(cfg.gamma), cfg.batch_size, rng, |_, _, _| Ok(None))?;
    }
    Ok(Some(last))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixupStats {
    pub loss_std: Option<f64>,
    pub loss_mix: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub lambda_intra_mean: Option<f64>,
    pub lambda_inter_mean: Option<f64>,
    pub notes: Vec<String>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn chunk(pairs: &[MixPair], step: usize, steps: usize) -> &[MixPair] {
    let size = pairs.len().div_ceil(steps.max(1));
    let lo = (step * size).min(pairs.len());
    let hi = ((step + 1) * size).min(pairs.len());
    &pairs[lo..hi]
}

/// Trains on `L_std + μ(L_intra + L_inter)` for `mix_epochs` passes over
/// the trustworthy subset. A no-op when mixup is disabled; with `μ = 0` the
/// passes are plain `L_std` passes. Pairs for a pass are drawn up front and spread
/// evenly over its mini-batches; their features are recomputed with the
/// current student at every step.
#[allow(clippy::too_many_arguments)]
pub fn mixup_phase(
    student: &mut ModelParams,
    opt: &mut Sgd,
    tt: &TrainingSubset,
    ut: &TrainingSubset,
    r: f64,
    cfg: &AdaptationConfig,
    shuffle_rng: &mut RandomSource,
    mix_rng: &mut RandomSource,
) -> Result<MixupStats> {
    let mut stats = MixupStats::default();
    if tt.is_empty() || cfg.mix_epochs == 0 || !cfg.enable_mixup {
        return Ok(stats);
    }
    let mixing = cfg.mu > 0.0;
    let alpha = restricted_alpha(cfg.alpha_inter, r)?;
    if mixing {
        stats.alpha_hat = Some(alpha.alpha_hat);
        if tt.len() < 2 {
            stats.notes.push("intra mixup skipped: fewer than two trustworthy samples".into());
        }
        if ut.is_empty() {
            stats.notes.push("inter mixup skipped: no untrustworthy samples".into());
        }
    }
    let (mut intra_l, mut inter_l, mut mix_losses) = (Vec::new(), Vec::new(), Vec::new());
    let mut last_std = 0.0;
    for _ in 0..cfg.mix_epochs {
        let (intra, inter) = if mixing {
            let intra = intra_pairs(
                tt.len(),
                cfg.intra_pair_budget.min(tt.len()),
                MixRatio::Beta(cfg.alpha_intra),
                mix_rng,
            )?;
            let inter = inter_pairs(tt.len(), ut.len(), tt.len().min(ut.len()), alpha.into(), mix_rng)?;
            intra_l.extend(intra.iter().map(|p| p.lambda));
            inter_l.extend(inter.iter().map(|p| p.lambda));
            (intra, inter)
        } else {
            (Vec::new(), Vec::new())
        };
        // Placeholders: mix_loss recomputes features from the parent inputs.
        let tt_feat = RealMatrix::zeros(tt.len(), student.feature_dim());
        let ut_feat = RealMatrix::zeros(ut.len(), student.feature_dim());
        let tt_pool = MixPool {
            features: &tt_feat,
            labels: &tt.labels,
            inputs: Some(&tt.inputs),
            classes: tt.classes,
        };
        let ut_pool = MixPool {
            features: &ut_feat,
            labels: &ut.labels,
            inputs: Some(&ut.inputs),
            classes: ut.classes,
        };
        last_std = train_pass(
            student,
            opt,
            tt,
            LossSpec::student(cfg.gamma),
            cfg.batch_size,
            shuffle_rng,
            |step, steps, current| {
                if !mixing {
                    return Ok(None);
                }
                let mut grads = current.zeros_like();
                let mut loss = 0.0;
                for (kind, pairs, second) in [(MixKind::Intra, &intra, &tt_pool), (MixKind::Inter, &inter, &ut_pool)] {
                    let part = chunk(pairs, step, steps);
                    if part.is_empty() {
                        continue;
                    }
                    let mb = build_batch(kind, part, &tt_pool, second)?;
                    let (l, g) = mix_loss(current, &mb)?;
                    loss += l;
                    grads.add_scaled(&g, cfg.mu)?;
                }
                mix_losses.push(loss);
                Ok(Some(grads))
            },
        )?;
    }
    stats.loss_std = Some(last_std);
    stats.loss_mix = mean(&mix_losses);
    stats.lambda_intra_mean = mean(&intra_l);
    stats.lambda_inter_mean = mean(&inter_l);
    Ok(stats)
}

/// Models around one fusion step, for observers.
pub struct EpochSnapshot<'a> {
    pub epoch: usize,
    pub beta: f64,
    pub student: &'a ModelParams,
    pub previous: &'a ModelParams,
    pub fused: &'a ModelParams,
    pub labels: &'a PseudoLabelSet,
    pub split: &'a SubsetSplit,
}

/// Mutable state carried between epochs.
#[derive(Clone, Debug)]
pub struct AdaptationState {
    /// Completed epochs.
    pub epoch: usize,
    /// The latest fused model `θ_n`.
    pub model: ModelParams,
    pub schedule: BetaSchedule,
    pub shuffle_rng: RandomSource,
    pub mix_rng: RandomSource,
    pub metrics: MetricsLog,
    pub last_labels: Option<PseudoLabelSet>,
    pub last_split: Option<SubsetSplit>,
}

impl AdaptationState {
    pub fn new(ctx: &AdaptContext) -> Result<Self> {
        let cfg = ctx.cfg;
        let root = RandomSource::new(cfg.seed);
        Ok(Self {
            epoch: 0,
            model: ctx.source.clone(),
            schedule: BetaSchedule::new(cfg.beta0, cfg.beta_final, cfg.epochs.max(1))?,
            shuffle_rng: root.derive(SHUFFLE_STREAM),
            mix_rng: root.derive(MIX_STREAM),
            metrics: MetricsLog::default(),
            last_labels: None,
            last_split: None,
        })
    }
}

fn fresh_student(ctx: &AdaptContext, previous: &ModelParams) -> Result<ModelParams> {
    if !ctx.cfg.enable_colearning {
        return Ok(previous.clone());
    }
    let classifier = if ctx.cfg.student_classifier_from_latest {
        previous.classifier()
    } else {
        ctx.source.classifier()
    };
    init_student(ctx.universal, classifier)
}

/// Fills the label-dependent metric columns.
pub(crate) fn label_metrics(
    row: &mut EpochMetrics,
    truth: Option<&GroundTruth>,
    target: &TargetView,
    model: &ModelParams,
    hard: &[usize],
    tt: &[usize],
) -> Result<()> {
    if let Some(t) = truth {
        row.target_accuracy = Some(t.accuracy(&predict(model, target.inputs())?));
        row.noise_rate = Some(t.full_noise_rate(hard));
        row.hard_class_noise_rate = t.tracked_noise_rate(hard);
        let assigned: Vec<usize> = tt.iter().map(|&i| hard[i]).collect();
        row.tt_noise_rate = t.noise_rate(tt, &assigned);
    }
    Ok(())
}

/// One target epoch: split with the previous model, train a fresh student,
/// fuse it into the previous model with the scheduled `β`.
pub fn run_epoch(
    state: &mut AdaptationState,
    ctx: &AdaptContext,
    observer: &mut dyn FnMut(&EpochSnapshot),
) -> Result<()> {
    let cfg = ctx.cfg;
    let n = state.epoch + 1;
    let beta = state.schedule.beta_at(n);
    let previous = state.model.clone();

    let round = curriculum_round(&previous, ctx.target, cfg.tau_norm)?;
    let hard = round.labels.hard();
    let split = if cfg.enable_filtering {
        round.split.clone()
    } else {
        SubsetSplit::everything(ctx.target.len())
    };
    let ut_labels = match (cfg.inter_labels_refined, round.labels.refined()) {
        (true, Some(refined)) => refined,
        _ => hard.clone(),
    };
    let tt = TrainingSubset::select(ctx.target, &split.trustworthy, &hard);
    let ut = TrainingSubset::select(ctx.target, &split.untrustworthy, &ut_labels);

    let mut row = EpochMetrics {
        epoch: n,
        beta,
        tt_size: tt.len(),
        ut_size: ut.len(),
        r: split.r,
        degenerate_prototypes: round.prototypes.degenerate_count(),
        ..Default::default()
    };

    let mut student = fresh_student(ctx, &previous)?;
    let mut opt = Sgd::new(cfg.sgd())?;
    let fused = if tt.is_empty() {
        row.notes.push("no trustworthy samples: training skipped".into());
        if cfg.skip_fusion_on_empty {
            row.notes.push("fusion skipped".into());
            previous.clone()
        } else {
            fuse_parameters(&student, &previous, beta)?
        }
    } else {
        row.loss_std = student_phase(&mut student, &mut opt, &tt, cfg, &mut state.shuffle_rng)?;
        let mix = mixup_phase(
            &mut student,
            &mut opt,
            &tt,
            &ut,
            split.r,
            cfg,
            &mut state.shuffle_rng,
            &mut state.mix_rng,
        )?;
        if mix.loss_std.is_some() {
            row.loss_std = mix.loss_std;
        }
        row.loss_mix = mix.loss_mix;
        row.alpha_hat = mix.alpha_hat;
        row.lambda_intra_mean = mix.lambda_intra_mean;
        row.lambda_inter_mean = mix.lambda_inter_mean;
        row.notes.extend(mix.notes);
        fuse_parameters(&student, &previous, beta)?
    };
    if !fused.all_finite() {
        return Err(Error::Numeric(format!("fused model is not finite after epoch {n}")));
    }
    observer(&EpochSnapshot {
        epoch: n,
        beta,
        student: &student,
        previous: &previous,
        fused: &fused,
        labels: &round.labels,
        split: &split,
    });
    label_metrics(&mut row, ctx.truth, ctx.target, &fused, &hard, &split.trustworthy)?;

    state.model = fused;
    state.epoch = n;
    state.metrics.rows.push(row);
    state.last_labels = Some(round.labels);
    state.last_split = Some(split);
    Ok(())
}

#[derive(Clone, Debug)]
pub struct AdaptationOutcome {
    pub model: ModelParams,
    pub metrics: MetricsLog,
    /// Pseudo-labels and split of the final epoch.
    pub final_labels: Option<PseudoLabelSet>,
    pub final_split: Option<SubsetSplit>,
}

/// Runs `cfg.epochs` epochs. Zero epochs returns the source model.
pub fn adapt(ctx: &AdaptContext) -> Result<AdaptationOutcome> {
    adapt_observed(ctx, &mut |_| {})
}

pub fn adapt_observed(ctx: &AdaptContext, observer: &mut dyn FnMut(&EpochSnapshot)) -> Result<AdaptationOutcome> {
    ctx.check()?;
    let mut state = AdaptationState::new(ctx)?;
    for _ in 0..ctx.cfg.epochs {
        run_epoch(&mut state, ctx, observer)?;
    }
    Ok(AdaptationOutcome {
        model: state.model,
        metrics: state.metrics,
        final_labels: state.last_labels,
        final_split: state.last_split,
    })
}
