//! Calibration sweep over seeds 0..5 on the default benchmark. Optional JSON
//! overrides: `PIPELINE='{"shift":{..}}' ADAPT='{"tau_norm":0.3}'`.

use sfda_core::adaptation::AdaptationConfig;
use sfda_core::data::linear_probe_accuracy;
use sfda_core::experiment::{PipelineConfig, Prepared};

fn merged<T: serde::Serialize + serde::de::DeserializeOwned + Default>(var: &str) -> T {
    let mut base = serde_json::to_value(T::default()).unwrap();
    if let Ok(text) = std::env::var(var) {
        let patch: serde_json::Value = serde_json::from_str(&text).unwrap();
        merge(&mut base, patch);
    }
    serde_json::from_value(base).unwrap()
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn main() {
    let pc: PipelineConfig = merged("PIPELINE");
    let base: AdaptationConfig = merged("ADAPT");
    let trace = std::env::var("TRACE").is_ok();
    let mut sums = [0.0; 6];
    let mut counts = [0usize; 8];
    for seed in 0..5u64 {
        let p = Prepared::new(&pc, seed).unwrap();
        let src = p.source_only_accuracy().unwrap();
        let cfg = AdaptationConfig { seed, ..base.clone() };
        let full = p.adapt(&pc.shift, &cfg).unwrap();
        let bl = p.baseline(&pc.shift, &cfg).unwrap();
        let mut abl = Vec::new();
        for f in 0..3 {
            let mut c = cfg.clone();
            match f {
                0 => c.enable_filtering = false,
                1 => c.enable_mixup = false,
                _ => c.enable_colearning = false,
            }
            abl.push(p.adapt(&pc.shift, &c).unwrap().metrics.last().unwrap().target_accuracy.unwrap());
        }
        let (f1, fl) = (full.metrics.first().unwrap(), full.metrics.last().unwrap());
        let (b1, bn) = (bl.metrics.first().unwrap(), bl.metrics.last().unwrap());
        let acc = fl.target_accuracy.unwrap();
        let bacc = bn.target_accuracy.unwrap();
        let probe_u = linear_probe_accuracy(&p.universal_model, &p.domains.target, 300).unwrap();
        let probe_s = linear_probe_accuracy(&p.source_model, &p.domains.target, 300).unwrap();
        counts[0] += (f1.tt_noise_rate.unwrap_or(1.0) < f1.noise_rate.unwrap()) as usize;
        counts[1] += (acc > src) as usize;
        counts[2] += (acc > bacc) as usize;
        counts[3] += (fl.r > f1.r) as usize;
        counts[4] += (bn.hard_class_noise_rate >= b1.hard_class_noise_rate) as usize;
        counts[5] += (fl.hard_class_noise_rate < f1.hard_class_noise_rate) as usize;
        counts[6] += (probe_u >= probe_s) as usize;
        counts[7] += (p.source_train_accuracy - src >= 0.10) as usize;
        for (s, v) in sums.iter_mut().zip([acc, abl[0], abl[1], abl[2], bacc, src]) {
            *s += v / 5.0;
        }
        println!(
            "seed {seed}: src {:.3}/{src:.3} full {acc:.3} base {bacc:.3} abl [{:.3} {:.3} {:.3}] r {:.3}->{:.3} tt/full noise {:.3}/{:.3} hard base {:.3}->{:.3} full {:.3}->{:.3} probe u/s {probe_u:.3}/{probe_s:.3}",
            p.source_train_accuracy, abl[0], abl[1], abl[2], f1.r, fl.r,
            f1.tt_noise_rate.unwrap_or(f64::NAN), f1.noise_rate.unwrap(),
            b1.hard_class_noise_rate.unwrap(), bn.hard_class_noise_rate.unwrap(),
            f1.hard_class_noise_rate.unwrap(), fl.hard_class_noise_rate.unwrap(),
        );
        if trace {
            for m in &full.metrics.rows {
                println!(
                    "  e{:2} beta {:.2} r {:.3} acc {:.3} noise {:.3} tt {:.3} hard {:.3} lstd {:.3} lmix {:.3}",
                    m.epoch, m.beta, m.r, m.target_accuracy.unwrap(), m.noise_rate.unwrap(),
                    m.tt_noise_rate.unwrap_or(f64::NAN), m.hard_class_noise_rate.unwrap(),
                    m.loss_std.unwrap_or(f64::NAN), m.loss_mix.unwrap_or(f64::NAN)
                );
            }
        }
    }
    println!(
        "mean full {:.4} -filter {:.4} -mixup {:.4} -colearn {:.4} base {:.4} src {:.4}",
        sums[0], sums[1], sums[2], sums[3], sums[4], sums[5]
    );
    println!(
        "purity {}/5 >src {}/5 >base {}/5 r-growth {}/5 base-hard-up {}/5 full-hard-down {}/5 probe {}/5 gap {}/5 ablation-ok {}",
        counts[0], counts[1], counts[2], counts[3], counts[4], counts[5], counts[6], counts[7],
        sums[0] >= sums[1] && sums[0] >= sums[2] && sums[0] >= sums[3] && sums[1] <= sums[2] && sums[1] <= sums[3]
    );
}
