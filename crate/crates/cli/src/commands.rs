use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use sfda_core::adaptation::{adapt_baseline, adapt_observed, AdaptContext, AdaptationConfig, AdaptationOutcome};
use sfda_core::curriculum::{curriculum_round, write_split_dump};
use sfda_core::data::{evaluate, load_dataset, save_dataset, AccuracyReport, Dataset, PretrainConfig, ShiftConfig};
use sfda_core::experiment::{generate_domains, pretrain_model, BenchmarkSizes, PipelineConfig};
use sfda_core::model::{load_checkpoint, save_checkpoint, ModelParams};
use sfda_core::numerics::PRNG_ID;

use crate::manifest::{RunManifest, MANIFEST_FORMAT};
use crate::{AdaptArgs, Ablation, Command, DumpArgs, EvalArgs, GenArgs, PretrainArgs};

pub(crate) fn dispatch(command: Command, invocation: &[String]) -> Result<()> {
    match command {
        Command::Gen(a) => gen(&a, invocation),
        Command::Pretrain(a) => pretrain(&a, invocation),
        Command::Adapt(a) => adapt(&a, invocation),
        Command::Eval(a) => eval(&a),
        Command::DumpFeatures(a) => dump_features(&a),
    }
}

/// Reads a JSON config over the defaults of `T`. A run manifest is accepted
/// too, in which case its resolved `config` is used.
pub fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut value: Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    if value.get("format").and_then(Value::as_str) == Some(MANIFEST_FORMAT) {
        value = value["config"].clone();
    }
    serde_json::from_value(value).with_context(|| format!("config {} does not match the schema", path.display()))
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if b < a {
            bail!("empty seed range {text}");
        }
        (a..=b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse::<u64>()).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("no seeds in {text:?}");
    }
    Ok(seeds)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn gen(a: &GenArgs, invocation: &[String]) -> Result<()> {
    let shift: ShiftConfig = read_config(a.config.as_deref())?;
    shift.validate()?;
    let defaults = BenchmarkSizes::default();
    let sizes = BenchmarkSizes {
        source: a.source_samples.unwrap_or(defaults.source),
        target: a.target_samples.unwrap_or(defaults.target),
        universal: a.universal_samples.unwrap_or(defaults.universal),
    };
    let domains = generate_domains(&shift, &sizes, a.seed)?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("gen", invocation, Some(a.seed), to_value(&shift));
    m.parameters = json!({ "sizes": sizes });
    if let Some(c) = &a.config {
        m.input("config", c)?;
    }
    for (name, data) in [
        ("source", &domains.source),
        ("target", &domains.target),
        ("universal", &domains.universal),
    ] {
        let path = a.out.join(format!("{name}.csv"));
        save_dataset(data, &path)?;
        m.output(name, &path)?;
        println!("{name}: {} samples -> {}", data.len(), path.display());
    }
    m.write(&a.out.join("manifest.json"))
}

fn pretrain(a: &PretrainArgs, invocation: &[String]) -> Result<()> {
    let defaults = PipelineConfig::default();
    let mut cfg: PretrainConfig = match &a.config {
        Some(p) => read_config(Some(p))?,
        None if a.init.is_some() => defaults.source_pretrain,
        None => defaults.universal_pretrain,
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.sgd.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let data = load_dataset(&a.data, a.classes)?;
    let init = a.init.as_deref().map(load_checkpoint).transpose()?;
    if let Some(init) = &init {
        let want = cfg.layer_dims(data.input_dim(), data.classes());
        let have = init.layer_dims();
        if have[..have.len() - 1] != want[..want.len() - 1] {
            bail!(sfda_core::Error::Usage(format!(
                "initial checkpoint has layer dims {have:?}, this run needs {want:?}"
            )));
        }
    }
    let outcome = pretrain_model(&data, &cfg, init.as_ref().map(|m| m.extractor()), a.seed)?;
    if let Some(w) = &outcome.warning {
        eprintln!("warning: {w}");
    }
    save_checkpoint(&outcome.params, &a.out)?;
    println!("train accuracy: {}", outcome.train_accuracy);
    let mut m = RunManifest::new("pretrain", invocation, Some(a.seed), to_value(&cfg));
    m.input("data", &a.data)?;
    if let Some(p) = &a.init {
        m.input("init", p)?;
    }
    m.output("checkpoint", &a.out)?;
    m.write(&manifest_path(&a.out))
}

fn format_report_table(source: &AccuracyReport, adapted: &AccuracyReport) -> String {
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.4}", x));
    let mut out = String::from("class  source-only  adapted\n");
    for (k, (s, t)) in source.per_class.iter().zip(&adapted.per_class).enumerate() {
        out += &format!("{k:>5}  {:>11}  {:>7}\n", cell(*s), cell(*t));
    }
    out += &format!(
        "  avg  {:>11}  {:>7}\n  all  {:>11}  {:>7}",
        cell(Some(source.class_average)),
        cell(Some(adapted.class_average)),
        cell(Some(source.accuracy)),
        cell(Some(adapted.accuracy)),
    );
    out
}

struct AdaptInputs {
    source: ModelParams,
    universal: ModelParams,
    target: Dataset,
}

fn resolve_adapt_config(a: &AdaptArgs) -> Result<AdaptationConfig> {
    let mut cfg: AdaptationConfig = read_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.epochs {
        cfg.epochs = n;
    }
    if let Some(t) = a.tau_norm {
        cfg.tau_norm = t;
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if let Some(mu) = a.mu {
        cfg.mu = mu;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    for ab in &a.ablate {
        match ab {
            Ablation::Filtering => cfg.enable_filtering = false,
            Ablation::Mixup => cfg.enable_mixup = false,
            Ablation::Colearning => cfg.enable_colearning = false,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn adapt(a: &AdaptArgs, invocation: &[String]) -> Result<()> {
    let base = resolve_adapt_config(a)?;
    let source = load_checkpoint(&a.source)?;
    let universal = load_checkpoint(&a.universal)?;
    let (s_dims, u_dims) = (source.layer_dims(), universal.layer_dims());
    if s_dims[..s_dims.len() - 1] != u_dims[..u_dims.len() - 1] {
        bail!(sfda_core::Error::Usage(format!(
            "source checkpoint layer dims {s_dims:?} do not match universal checkpoint {u_dims:?}"
        )));
    }
    let target = load_dataset(&a.target, Some(source.classes()))?;
    if target.input_dim() != source.input_dim() {
        bail!(sfda_core::Error::Usage(format!(
            "target data has {} features, source model expects {}",
            target.input_dim(),
            source.input_dim()
        )));
    }
    if let Some(&c) = a.hard_classes.iter().find(|&&c| c >= target.classes()) {
        bail!(sfda_core::Error::Usage(format!(
            "hard class {c} out of range for {} classes",
            target.classes()
        )));
    }
    let inputs = AdaptInputs { source, universal, target };
    let seeds = match &a.seeds {
        Some(text) => parse_seeds(text)?,
        None => vec![base.seed],
    };
    if a.seeds.is_none() {
        return adapt_one(a, invocation, &inputs, &base, &a.out);
    }
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = AdaptationConfig { seed, ..base.clone() };
                let dir = a.out.join(format!("seed-{seed}"));
                let inputs = &inputs;
                scope.spawn(move || adapt_one(a, invocation, inputs, &cfg, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    for (seed, r) in seeds.iter().zip(results) {
        r.with_context(|| format!("seed {seed}"))?;
    }
    Ok(())
}

fn adapt_one(a: &AdaptArgs, invocation: &[String], inputs: &AdaptInputs, cfg: &AdaptationConfig, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let (view, truth) = inputs.target.split_labels();
    let truth = truth.with_tracked_classes(&a.hard_classes);
    let splits_dir = dir.join("splits");
    if a.dump_splits && !a.baseline {
        create_dir(&splits_dir)?;
    }
    let outcome: AdaptationOutcome = if a.baseline {
        adapt_baseline(&inputs.source, &view, Some(&truth), cfg)?
    } else {
        let mut dump_error = None;
        let ctx = AdaptContext {
            source: &inputs.source,
            universal: inputs.universal.extractor(),
            target: &view,
            truth: Some(&truth),
            cfg,
        };
        let outcome = adapt_observed(&ctx, &mut |snap| {
            if a.dump_splits && dump_error.is_none() {
                let path = splits_dir.join(format!("epoch-{:03}.csv", snap.epoch));
                if let Err(e) = write_split_dump(&path, snap.labels, snap.split) {
                    dump_error = Some(e);
                }
            }
        })?;
        if let Some(e) = dump_error {
            return Err(e.into());
        }
        outcome
    };

    let model_path = dir.join("model.json");
    let metrics_path = dir.join("metrics.csv");
    let report_path = dir.join("report.json");
    save_checkpoint(&outcome.model, &model_path)?;
    outcome.metrics.write_csv(&metrics_path, PRNG_ID)?;
    let before = evaluate(&inputs.source, &inputs.target)?;
    let after = evaluate(&outcome.model, &inputs.target)?;
    let report = json!({ "source_only": before, "adapted": after });
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;

    let mode = if a.baseline { "baseline" } else { "adapt" };
    println!("[seed {}] {mode}: final target accuracy {:.4} (source-only {:.4})", cfg.seed, after.accuracy, before.accuracy);
    println!("{}", format_report_table(&before, &after));

    let mut m = RunManifest::new("adapt", invocation, Some(cfg.seed), to_value(cfg));
    m.parameters = json!({ "mode": mode, "hard_classes": a.hard_classes });
    m.input("source", &a.source)?;
    m.input("universal", &a.universal)?;
    m.input("target", &a.target)?;
    if let Some(c) = &a.config {
        m.input("config", c)?;
    }
    m.output("model", &model_path)?;
    m.output("metrics", &metrics_path)?;
    m.output("report", &report_path)?;
    m.write(&dir.join("manifest.json"))
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = load_checkpoint(&a.model)?;
    let data = load_dataset(&a.data, Some(model.classes()))?;
    let report = evaluate(&model, &data)?;
    println!("samples: {}", report.samples);
    println!("accuracy: {}", report.accuracy);
    for (k, acc) in report.per_class.iter().enumerate() {
        match acc {
            Some(v) => println!("class {k}: {v}"),
            None => println!("class {k}: -"),
        }
    }
    println!("class average: {}", report.class_average);
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn dump_features(a: &DumpArgs) -> Result<()> {
    use std::io::Write;
    let model = load_checkpoint(&a.model)?;
    let data = load_dataset(&a.data, Some(model.classes()))?;
    let round = curriculum_round(&model, &data.unlabeled_view(), a.tau_norm)?;
    let mut subset = vec!["ut"; data.len()];
    for &i in &round.split.trustworthy {
        subset[i] = "tt";
    }
    let features = round.record.features();
    let file = std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    let header: Vec<String> = (0..features.cols()).map(|j| format!("f{j}")).collect();
    writeln!(w, "index,label,subset,{}", header.join(","))?;
    for (i, row) in features.row_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{i},{},{},{}", data.labels()[i], subset[i], cells.join(","))?;
    }
    w.flush()?;
    println!("{} rows, {} features -> {}", data.len(), features.cols(), a.out.display());
    Ok(())
}
