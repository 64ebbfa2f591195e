//! Acceptance suite. Each criterion is one test that writes a single
//! `PASS`/`FAIL` line to stderr (bypassing the harness's output capture)
//! before asserting.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use sfda_core::adaptation::{AdaptationConfig, MetricsLog};
use sfda_core::curriculum::{prototypes_from, refine_labels, split_trustworthy, trust_ratio, PseudoLabelSet};
use sfda_core::experiment::{PipelineConfig, Prepared};
use sfda_core::mixup::{build_batch, fold_ratio, inter_pairs, mix_loss, restricted_alpha, MixKind, MixPair, MixPool, MixRatio};
use sfda_core::model::{fuse_parameters, loss_and_gradients, LossSpec, ModelParams};
use sfda_core::numerics::{sample_beta, softmax, ProbVector, RandomSource, RealMatrix};

/// Frozen after the one-time calibration on seeds 0..5 (see README): the
/// adapted model must beat source-only and the baseline by these margins.
const MARGIN_OVER_SOURCE: f64 = 0.0025;
const MARGIN_OVER_BASELINE: f64 = 0.0025;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {id}: {} {name} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

// ---------------------------------------------------------------------------
// Brute-force oracles.

fn oracle_prototypes(features: &RealMatrix, probs: &[ProbVector]) -> Vec<Vec<f64>> {
    let (n, d, k) = (features.rows(), features.cols(), probs[0].len());
    let mut out = vec![vec![0.0; d]; k];
    for c in 0..k {
        let mut mass = 0.0;
        for i in 0..n {
            mass += probs[i].as_slice()[c];
        }
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..n {
                s += probs[i].as_slice()[c] * features.get(i, j);
            }
            out[c][j] = s / mass;
        }
    }
    out
}

fn oracle_cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    1.0 - ab / (aa.sqrt() * bb.sqrt())
}

fn oracle_refine(features: &RealMatrix, protos: &[Vec<f64>]) -> Vec<usize> {
    (0..features.rows())
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, p) in protos.iter().enumerate() {
                let d = oracle_cosine_distance(features.row(i), p);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn oracle_entropy_norm(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.ln();
        }
    }
    h / (p.len() as f64).ln()
}

fn random_probs(rng: &mut RandomSource, n: usize, k: usize, sharpness: f64) -> Vec<ProbVector> {
    (0..n)
        .map(|_| {
            let logits: Vec<f64> = (0..k).map(|_| sharpness * rng.normal()).collect();
            softmax(&logits).unwrap()
        })
        .collect()
}

fn random_matrix(rng: &mut RandomSource, r: usize, c: usize) -> RealMatrix {
    RealMatrix::new(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap()
}

#[test]
fn criterion_1_equation_oracles() {
    let instances = 120;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut bump = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0);
        *e = e.max(v);
    };
    let mut mismatches = 0usize;
    let mut rng = RandomSource::new(20_240);
    for t in 0..instances {
        let n = 8 + rng.below(40);
        let k = 2 + rng.below(4);
        let d = 2 + rng.below(6);
        let features = random_matrix(&mut rng, n, d);
        let sharpness = 1.0 + 3.0 * rng.next_f64();
        let probs = random_probs(&mut rng, n, k, sharpness);

        // Prototypes.
        let protos = prototypes_from(&features, &probs).unwrap();
        let expect = oracle_prototypes(&features, &probs);
        for (a, b) in protos.prototypes.iter().zip(&expect) {
            for (x, y) in a.iter().zip(b) {
                bump("prototypes", (x - y).abs());
            }
        }

        // Refinement.
        let refined = refine_labels(&features, &protos).unwrap();
        mismatches += refined.iter().zip(oracle_refine(&features, &expect)).filter(|(a, b)| **a != *b).count();

        // Split and trust ratio.
        let tau = 0.05 + 0.95 * rng.next_f64();
        let mut pl = PseudoLabelSet::from_probs(&probs);
        pl.set_refined(&refined).unwrap();
        let split = split_trustworthy(&pl, tau).unwrap();
        let mut tt = Vec::new();
        let mut ut = Vec::new();
        for i in 0..n {
            let p = probs[i].as_slice();
            let mut hard = 0;
            for c in 1..k {
                if p[c] > p[hard] {
                    hard = c;
                }
            }
            let en = oracle_entropy_norm(p);
            bump("entropy", (pl.labels[i].entropy_norm - en).abs());
            if en < tau && hard == refined[i] {
                tt.push(i);
            } else {
                ut.push(i);
            }
        }
        mismatches += (split.trustworthy != tt) as usize + (split.untrustworthy != ut) as usize;
        bump("r", (split.r - tt.len() as f64 / n as f64).abs());
        bump("r", (trust_ratio(tt.len(), ut.len()) - tt.len() as f64 / n as f64).abs());

        // Restricted mixing coefficient.
        let alpha = 0.1 + 4.0 * rng.next_f64();
        let ra = restricted_alpha(alpha, split.r).unwrap();
        bump("alpha_hat", (ra.alpha_hat - (alpha * split.r * split.r).max(1e-3)).abs());

        // Mixing.
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let pool = MixPool { features: &features, labels: &labels, inputs: None, classes: k };
        let pairs: Vec<MixPair> = (0..n)
            .map(|_| MixPair {
                first: rng.below(n),
                second: rng.below(n),
                lambda: rng.next_f64(),
            })
            .collect();
        let mb = build_batch(MixKind::Intra, &pairs, &pool, &pool).unwrap();
        for (row, p) in pairs.iter().enumerate() {
            for j in 0..d {
                let x = p.lambda * features.get(p.first, j) + (1.0 - p.lambda) * features.get(p.second, j);
                bump("mixing", (mb.mixed_features.get(row, j) - x).abs());
            }
            for c in 0..k {
                let mut y = 0.0;
                if labels[p.first] == c {
                    y += p.lambda;
                }
                if labels[p.second] == c {
                    y += 1.0 - p.lambda;
                }
                bump("mixing", (mb.mixed_labels[row].as_slice()[c] - y).abs());
            }
        }

        // Fusion.
        let dims = [d, 3 + t % 4, k];
        let a = ModelParams::init(&dims, &mut rng).unwrap();
        let b = ModelParams::init(&dims, &mut rng).unwrap();
        let beta = rng.next_f64();
        let fused = fuse_parameters(&a, &b, beta).unwrap();
        for ((f, x), y) in fused.to_flat().iter().zip(a.to_flat()).zip(b.to_flat()) {
            bump("fusion", (f - (beta * x + (1.0 - beta) * y)).abs());
        }
    }
    let fusion_ok = worst["fusion"] <= 1e-15;
    let others_ok = worst.iter().filter(|(k, _)| **k != "fusion").all(|(_, v)| *v <= 1e-10);
    let pass = fusion_ok && others_ok && mismatches == 0;
    let detail = format!(
        "{instances} instances; max errors {}; label mismatches {mismatches}",
        worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ")
    );
    report(1, "equation-level oracle equivalence", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// Finite differences.

fn central_difference(params: &ModelParams, f: &dyn Fn(&ModelParams) -> f64) -> Vec<f64> {
    let dims = params.layer_dims();
    let base = params.to_flat();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let h = 1e-5 * (1.0 + base[i].abs());
        let mut p = base.clone();
        p[i] = base[i] + h;
        let up = f(&ModelParams::from_flat(&dims, &p).unwrap());
        p[i] = base[i] - h;
        let down = f(&ModelParams::from_flat(&dims, &p).unwrap());
        out.push((up - down) / (2.0 * h));
    }
    out
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / (1e-8f64).max(a.abs() + f.abs()))
        .fold(0.0, f64::max)
}

fn soft_targets(rng: &mut RandomSource, n: usize, k: usize) -> Vec<ProbVector> {
    random_probs(rng, n, k, 1.0)
}

#[test]
fn criterion_2_gradient_integrity() {
    let instances = 60;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut rng = RandomSource::new(7_777);
    for _ in 0..instances {
        let d_in = 2 + rng.below(3);
        let k = 2 + rng.below(3);
        let dims = [d_in, 3 + rng.below(3), 2 + rng.below(3), k];
        let params = ModelParams::init(&dims, &mut rng).unwrap();
        let n = 3 + rng.below(5);
        let x = random_matrix(&mut rng, n, d_in);
        let targets = soft_targets(&mut rng, n, k);
        let gamma = 0.1 + rng.next_f64();

        let mut check = |name: &'static str, spec: LossSpec| {
            let t = (spec.ce_weight != 0.0).then_some(targets.as_slice());
            let (_, g) = loss_and_gradients(&params, &x, t, spec).unwrap();
            let num = central_difference(&params, &|p| loss_and_gradients(p, &x, t, spec).unwrap().0);
            let e = relative_error(&g.to_flat(), &num);
            let w = worst.entry(name).or_insert(0.0);
            *w = w.max(e);
        };
        check("L_ce", LossSpec::cross_entropy_only());
        check("L_ent", LossSpec::entropy_only());
        check("L_std", LossSpec::student(gamma));

        // Mixed batches with parents, intra and inter.
        let n_ut = 2 + rng.below(4);
        let x_ut = random_matrix(&mut rng, n_ut, d_in);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let labels_ut: Vec<usize> = (0..n_ut).map(|_| rng.below(k)).collect();
        let f_tt = RealMatrix::zeros(n, dims[2]);
        let f_ut = RealMatrix::zeros(n_ut, dims[2]);
        let tt = MixPool { features: &f_tt, labels: &labels, inputs: Some(&x), classes: k };
        let ut = MixPool { features: &f_ut, labels: &labels_ut, inputs: Some(&x_ut), classes: k };
        let intra: Vec<MixPair> = (0..n)
            .map(|_| MixPair {
                first: rng.below(n),
                second: rng.below(n),
                lambda: rng.next_f64(),
            })
            .collect();
        let inter = inter_pairs(n, n_ut, n, MixRatio::Beta(2.0), &mut rng).unwrap();
        let mb_intra = build_batch(MixKind::Intra, &intra, &tt, &tt).unwrap();
        let mb_inter = build_batch(MixKind::Inter, &inter, &tt, &ut).unwrap();

        let (_, g) = mix_loss(&params, &mb_intra).unwrap();
        let num = central_difference(&params, &|p| mix_loss(p, &mb_intra).unwrap().0);
        let e = relative_error(&g.to_flat(), &num);
        let w = worst.entry("L_mix").or_insert(0.0);
        *w = w.max(e);

        let mu = 0.2 + rng.next_f64();
        let hard: Vec<ProbVector> = labels.iter().map(|&l| ProbVector::one_hot(l, k)).collect();
        let total = |p: &ModelParams| -> (f64, ModelParams) {
            let (ls, mut g) = loss_and_gradients(p, &x, Some(&hard), LossSpec::student(gamma)).unwrap();
            let (la, ga) = mix_loss(p, &mb_intra).unwrap();
            let (le, ge) = mix_loss(p, &mb_inter).unwrap();
            g.add_scaled(&ga, mu).unwrap();
            g.add_scaled(&ge, mu).unwrap();
            (ls + mu * (la + le), g)
        };
        let (_, g) = total(&params);
        let num = central_difference(&params, &|p| total(p).0);
        let e = relative_error(&g.to_flat(), &num);
        let w = worst.entry("L_tot").or_insert(0.0);
        *w = w.max(e);
    }
    let pass = worst.values().all(|&v| v < 1e-5);
    let detail = format!(
        "{instances} instances; max relative error {}",
        worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ")
    );
    report(2, "gradient integrity", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// Default benchmark runs, shared by criteria 3-7.

struct SeedRun {
    source_only: f64,
    full: MetricsLog,
    baseline: MetricsLog,
    /// Final accuracy without filtering, mixup, co-learning.
    ablations: [f64; 3],
}

struct BenchmarkRuns {
    runs: Vec<SeedRun>,
    elapsed: Duration,
}

fn final_accuracy(log: &MetricsLog) -> f64 {
    log.last().and_then(|m| m.target_accuracy).unwrap()
}

fn benchmark() -> &'static BenchmarkRuns {
    static CELL: OnceLock<BenchmarkRuns> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let pc = PipelineConfig::default();
        let runs = SEEDS
            .iter()
            .map(|&seed| {
                let p = Prepared::new(&pc, seed).unwrap();
                let cfg = AdaptationConfig { seed, ..Default::default() };
                let ablate = |f: fn(&mut AdaptationConfig)| {
                    let mut c = cfg.clone();
                    f(&mut c);
                    final_accuracy(&p.adapt(&pc.shift, &c).unwrap().metrics)
                };
                SeedRun {
                    source_only: p.source_only_accuracy().unwrap(),
                    full: p.adapt(&pc.shift, &cfg).unwrap().metrics,
                    baseline: p.baseline(&pc.shift, &cfg).unwrap().metrics,
                    ablations: [
                        ablate(|c| c.enable_filtering = false),
                        ablate(|c| c.enable_mixup = false),
                        ablate(|c| c.enable_colearning = false),
                    ],
                }
            })
            .collect();
        BenchmarkRuns { runs, elapsed: start.elapsed() }
    })
}

fn seeds_where(pred: impl Fn(&SeedRun) -> bool) -> Vec<u64> {
    benchmark().runs.iter().zip(SEEDS).filter(|(r, _)| pred(r)).map(|(_, s)| s).collect()
}

#[test]
fn criterion_3_filtering_purity() {
    let runs = &benchmark().runs;
    let pairs: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| {
            let m = r.full.first().unwrap();
            (m.tt_noise_rate.unwrap_or(f64::INFINITY), m.noise_rate.unwrap())
        })
        .collect();
    let pass = pairs.iter().all(|(tt, all)| tt < all);
    let detail = pairs
        .iter()
        .zip(SEEDS)
        .map(|((tt, all), s)| format!("seed {s}: {tt:.3} < {all:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(3, "filtering purity at epoch 1, all 5 seeds", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_end_to_end_improvement() {
    let b = benchmark();
    let over_source = seeds_where(|r| final_accuracy(&r.full) >= r.source_only + MARGIN_OVER_SOURCE);
    let over_base = seeds_where(|r| final_accuracy(&r.full) >= final_accuracy(&r.baseline) + MARGIN_OVER_BASELINE);
    let fast = b.elapsed < Duration::from_secs(120);
    let pass = over_source.len() >= 4 && over_base.len() >= 4 && fast;
    let accs: Vec<String> = b
        .runs
        .iter()
        .map(|r| format!("{:.3}/{:.3}/{:.3}", final_accuracy(&r.full), r.source_only, final_accuracy(&r.baseline)))
        .collect();
    let detail = format!(
        "adapted/source/baseline {}; beats source on {:?}, baseline on {:?}; all benchmark runs {:.1}s",
        accs.join(" "),
        over_source,
        over_base,
        b.elapsed.as_secs_f64()
    );
    report(4, "end-to-end improvement on >= 4/5 seeds", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_trustworthy_growth() {
    let growing = seeds_where(|r| r.full.last().unwrap().r > r.full.first().unwrap().r);
    let detail = benchmark()
        .runs
        .iter()
        .map(|r| format!("{:.3}->{:.3}", r.full.first().unwrap().r, r.full.last().unwrap().r))
        .collect::<Vec<_>>()
        .join(" ");
    let pass = growing.len() >= 4;
    report(5, "trustworthy subset grows on >= 4/5 seeds", pass, &format!("r {detail}; grows on {growing:?}"));
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_ablation_ordering() {
    let runs = &benchmark().runs;
    let n = runs.len() as f64;
    let full = runs.iter().map(|r| final_accuracy(&r.full)).sum::<f64>() / n;
    let abl: Vec<f64> = (0..3).map(|i| runs.iter().map(|r| r.ablations[i]).sum::<f64>() / n).collect();
    let pass = abl.iter().all(|&a| full >= a) && abl[0] <= abl[1] && abl[0] <= abl[2];
    let detail = format!(
        "mean final accuracy full {full:.4}, without filtering {:.4}, without mixup {:.4}, without co-learning {:.4}",
        abl[0], abl[1], abl[2]
    );
    report(6, "ablation ordering", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_noise_accumulation() {
    let hard = |log: &MetricsLog| {
        (
            log.first().unwrap().hard_class_noise_rate.unwrap(),
            log.last().unwrap().hard_class_noise_rate.unwrap(),
        )
    };
    let base_up = seeds_where(|r| {
        let (a, b) = hard(&r.baseline);
        b >= a
    });
    let full_down = seeds_where(|r| {
        let (a, b) = hard(&r.full);
        b < a
    });
    let pass = base_up.len() >= 3 && full_down.len() >= 3;
    let detail = benchmark()
        .runs
        .iter()
        .map(|r| {
            let (a, b) = hard(&r.baseline);
            let (c, d) = hard(&r.full);
            format!("baseline {a:.3}->{b:.3} adapted {c:.3}->{d:.3}")
        })
        .collect::<Vec<_>>()
        .join("; ");
    report(
        7,
        "hard-class noise: baseline non-decreasing, adapted decreasing, majority of seeds",
        pass,
        &format!("{detail}; baseline up on {base_up:?}, adapted down on {full_down:?}"),
    );
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// Determinism through the command-line pipeline.

fn sfda(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_sfda")).args(args).output().unwrap();
    assert!(out.status.success(), "sfda {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_pipeline(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let _ = std::fs::remove_dir_all(dir);
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    sfda(&["gen", "--out", &p("data"), "--seed", "0"]);
    sfda(&["pretrain", "--data", &p("data/universal.csv"), "--out", &p("universal.json"), "--seed", "0"]);
    sfda(&[
        "pretrain", "--data", &p("data/source.csv"), "--out", &p("source.json"), "--init", &p("universal.json"),
        "--seed", "0",
    ]);
    sfda(&[
        "adapt", "--source", &p("source.json"), "--universal", &p("universal.json"), "--target",
        &p("data/target.csv"), "--out", &p("run"), "--seed", "0", "--dump-splits", "--hard-classes", "3",
    ]);
    sfda(&[
        "adapt", "--source", &p("source.json"), "--universal", &p("universal.json"), "--target",
        &p("data/target.csv"), "--out", &p("baseline"), "--seed", "0", "--baseline",
    ]);
    sfda(&["eval", "--model", &p("run/model.json"), "--data", &p("data/target.csv"), "--json", &p("eval.json")]);
    sfda(&["dump-features", "--model", &p("run/model.json"), "--data", &p("data/target.csv"), "--out", &p("features.csv")]);
    let mut files = BTreeMap::new();
    collect(dir, dir, &mut files);
    files
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, out);
        } else {
            let mut bytes = std::fs::read(&path).unwrap();
            if path.to_string_lossy().ends_with("manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("created_unix");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
        }
    }
}

#[test]
fn criterion_8_determinism() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let start = Instant::now();
    let first = run_pipeline(&dir);
    let once = start.elapsed();
    let second = run_pipeline(&dir);
    let differing: Vec<String> = first
        .iter()
        .filter(|(k, v)| second.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let report_json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("run/report.json")).unwrap()).unwrap();
    let adapted = report_json["adapted"]["accuracy"].as_f64().unwrap();
    let source = report_json["source_only"]["accuracy"].as_f64().unwrap();
    let pass = differing.is_empty() && first.len() == second.len() && first.len() >= 15;
    let detail = format!(
        "{} files compared, {} differ; one pipeline run {:.1}s, adapted {adapted:.3} vs source-only {source:.3}",
        first.len(),
        differing.len(),
        once.as_secs_f64()
    );
    report(8, "byte-identical pipeline reruns", pass, &detail);
    assert!(pass, "{detail}; differing: {differing:?}");
    assert!(once < Duration::from_secs(60) && adapted > source, "{detail}");
}

#[test]
fn criterion_9_statistical_checks() {
    let draws = 100_000;
    let mut rng = RandomSource::new(99);
    let mut means = Vec::new();
    for alpha in [0.2, 0.5, 1.0, 2.0, 5.0] {
        let m = (0..draws).map(|_| sample_beta(alpha, &mut rng).unwrap()).sum::<f64>() / draws as f64;
        means.push((alpha, m));
    }
    let means_ok = means.iter().all(|(_, m)| (m - 0.5).abs() <= 0.01);

    let mut min_folded = f64::INFINITY;
    let mut folded_sum = 0.0;
    let mut folded_n = 0usize;
    while folded_n < draws {
        let pairs = inter_pairs(1000, 1000, 1000, MixRatio::Beta(2.0), &mut rng).unwrap();
        for p in pairs {
            min_folded = min_folded.min(p.lambda);
            folded_sum += p.lambda;
            folded_n += 1;
        }
    }
    for r in [0.0, 0.1, 0.5, 1.0] {
        let ra = restricted_alpha(2.0, r).unwrap();
        for p in inter_pairs(500, 500, 500, ra.into(), &mut rng).unwrap() {
            min_folded = min_folded.min(p.lambda);
        }
    }
    min_folded = min_folded.min(fold_ratio(0.0)).min(fold_ratio(0.3));
    let folded_mean = folded_sum / folded_n as f64;
    let pass = means_ok && min_folded >= 0.5 && (folded_mean - 0.6875).abs() <= 0.02;
    let detail = format!(
        "Beta(a,a) means {}; min folded {min_folded:.4}; folded Beta(2,2) mean {folded_mean:.4} over {folded_n}",
        means.iter().map(|(a, m)| format!("a={a}: {m:.4}")).collect::<Vec<_>>().join(" ")
    );
    report(9, "sampler statistics", pass, &detail);
    assert!(pass, "{detail}");
}
