//! Acceptance criteria, run in sequence so wall-clock limits mean something.
//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mgt_detect::corpus::{train_val_split, Label};
use mgt_detect::eval::{confusion, evaluate, metrics, rounded_params, Confusion};
use mgt_detect::gradsuite::run_suite;
use mgt_detect::numerics::GradCheckConfig;
use mgt_detect::pipeline::{
    checkpoint_bytes, checkpoint_from_bytes, train, variant_spec, Model, Overrides, Preset, TrainConfig, VariantName,
};
use mgt_detect::probe::{probe_report, sentence_losses, LanguageModel, LmConfig, LmKind, ProbeConfig};
use mgt_detect::synthetic::{probe_corpus, toy_corpus};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parameter_counts() -> Outcome {
    let audit = |name| {
        variant_spec(name, Preset::Base, &Overrides::default())
            .unwrap()
            .audit()
    };
    let lora = audit(VariantName::LoraFrozen);
    ensure(lora.adapter == 737_280, || format!("lora adapters {}", lora.adapter))?;
    ensure(rounded_params(lora.adapter) == "0.7M", || rounded_params(lora.adapter))?;
    for (name, want, rounded) in [
        (VariantName::BilstmFrozen, 3_675_138, "4M"),
        (VariantName::GruFrozen, 2_756_610, "3M"),
        (VariantName::BilstmUnfrozen2, 14_175_744 + 3_675_138, "18M"),
    ] {
        let a = audit(name);
        ensure(a.total == want && a.rounded == rounded, || {
            format!("{name}: {} ({}) != {want} ({rounded})", a.total, a.rounded)
        })?;
    }
    let full = audit(VariantName::FullFinetune).total as f64;
    ensure((full / 124e6 - 1.0).abs() <= 0.02, || format!("full finetune {full}"))?;
    Ok(format!(
        "lora 737,280 (0.7M), bilstm 3,675,138 (4M), gru 2,756,610 (3M), unfrozen2 17,850,882 (18M), full {:.2}M",
        full / 1e6
    ))
}

fn gradient_checks() -> Outcome {
    let report = run_suite(&GradCheckConfig::default());
    let failed: Vec<_> = report.failures().iter().map(|c| c.case.clone()).collect();
    ensure(failed.is_empty(), || format!("failed cases: {failed:?}"))?;
    Ok(format!(
        "{} cases, max rel err {:.2e} < 1e-4",
        report.cases.len(),
        report.max_rel_err()
    ))
}

fn toy_training() -> Outcome {
    let seed = 2024;
    let records = toy_corpus(2000, seed);
    let (tr, va) = train_val_split(&records, 0.8, seed);
    let spec = variant_spec(VariantName::BilstmFrozen, Preset::Desk, &Overrides::default()).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        seed,
        ..TrainConfig::default()
    };
    let run = || {
        let model = Model::for_training(spec.clone(), &tr, seed).unwrap();
        train(model, &tr, &va, &cfg).unwrap()
    };
    let a = run();
    let meta = a.training.as_ref().unwrap();
    let acc = meta.history[meta.best_epoch - 1].val_accuracy;
    ensure(acc >= 0.95, || format!("val accuracy {acc}"))?;
    ensure(meta.history.len() <= 10, || "more than 10 epochs".into())?;
    let b = run();
    ensure(checkpoint_bytes(&a).unwrap() == checkpoint_bytes(&b).unwrap(), || {
        "two runs with one seed differ".into()
    })?;
    Ok(format!(
        "val accuracy {acc:.4} at epoch {} of {}, identical rerun",
        meta.best_epoch,
        meta.history.len()
    ))
}

/// Counts and metrics straight from the definitions.
fn oracle(pred: &[Label], gold: &[Label]) -> (Confusion, [f64; 7]) {
    let count = |p: Label, g: Label| pred.iter().zip(gold).filter(|(&a, &b)| a == p && b == g).count();
    let c = Confusion {
        tp: count(Label::Machine, Label::Machine),
        fp: count(Label::Machine, Label::Human),
        tn: count(Label::Human, Label::Human),
        fn_: count(Label::Human, Label::Machine),
    };
    let per_class = |cls: Label| {
        let tp = count(cls, cls) as f64;
        let predicted = pred.iter().filter(|&&p| p == cls).count() as f64;
        let actual = gold.iter().filter(|&&g| g == cls).count() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        let f = if predicted + actual > 0.0 { 2.0 * tp / (predicted + actual) } else { 0.0 };
        (p, r, f)
    };
    let (hp, hr, hf) = per_class(Label::Human);
    let (mp, mr, mf) = per_class(Label::Machine);
    let correct = pred.iter().zip(gold).filter(|(a, b)| a == b).count() as f64;
    (
        c,
        [correct / pred.len() as f64, mp, mr, mf, (hp + mp) / 2.0, (hr + mr) / 2.0, (hf + mf) / 2.0],
    )
}

fn metrics_oracle() -> Outcome {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.gen_range(1..200);
        let bias: f64 = r.gen();
        let pred: Vec<Label> = (0..n).map(|_| if r.gen_bool(bias) { Label::Machine } else { Label::Human }).collect();
        let gold: Vec<Label> = (0..n).map(|_| if r.gen_bool(0.5) { Label::Machine } else { Label::Human }).collect();
        let m = evaluate(&pred, &gold).unwrap();
        let (c, want) = oracle(&pred, &gold);
        ensure(m.confusion == c, || format!("confusion {:?} vs {c:?}", m.confusion))?;
        let got = [
            m.accuracy,
            m.machine.precision,
            m.machine.recall,
            m.machine.f1,
            m.precision_macro,
            m.recall_macro,
            m.f1_macro,
        ];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let m = metrics(&Confusion {
        tp: 50,
        fn_: 2,
        fp: 17,
        tn: 31,
    });
    let (p, rc) = (m.machine.precision, m.machine.recall);
    ensure(format!("{p:.4}") == "0.7463" && format!("{rc:.4}") == "0.9615", || {
        format!("precision {p}, recall {rc}")
    })?;
    ensure(confusion(&[], &[]).is_err(), || "empty input accepted".into())?;
    Ok(format!(
        "1000 random sets within {worst:.1e}; tp=50 fn=2 fp=17 tn=31 gives precision {p:.4}, recall {rc:.4}"
    ))
}

const FIXTURE_GRID: &str = "\
Model/Source  chatGPT  cohere  davinci  dolly  human  total
-----------------------------------------------------------
arxiv               0       0        2      2      4      8
peerread            1       1        0      0      4      6
reddit              2       2        0      0      5      9
wikihow             3       2        0      0      2      7
wikipedia           0       0        3      2      5     10
-----------------------------------------------------------
total               6       5        5      4     20     40
";

fn mgtd(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_mgtd"))
        .args(args)
        .env_remove("MGT_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(o.stdout)
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/fixture.jsonl")
        .to_str()
        .unwrap()
        .to_string()
}

fn fixture_stats() -> Outcome {
    let f = fixture();
    let a = mgtd(&["stats", "--input", &f])?;
    let b = mgtd(&["stats", "--input", &f])?;
    ensure(a == b, || "stats output differs between runs".into())?;
    ensure(a == FIXTURE_GRID.as_bytes(), || String::from_utf8_lossy(&a).into_owned())?;
    Ok("5 domains x 5 generators, 40 records, byte-identical reruns".into())
}

fn loss_probe() -> Outcome {
    let (human, machine) = probe_corpus(500, 2024);
    let (th, vh) = human.split_at(400);
    let (tm, vm) = machine.split_at(400);
    let report = probe_report(th, tm, vh, vm, &ProbeConfig::default()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for kind in LmKind::ALL {
        for trained in [Label::Human, Label::Machine] {
            let var = |eval| report.panel(kind, trained, eval).unwrap().stats.variance;
            let (h, m) = (var(Label::Human), var(Label::Machine));
            ensure(h > m, || format!("{} trained on {}: {h} <= {m}", kind.as_str(), trained.name()))?;
            notes.push(format!("{}/{} {h:.3}>{m:.3}", kind.as_str(), trained.name()));
        }
    }
    let mut all = th.to_vec();
    all.extend_from_slice(tm);
    let vocab = mgt_detect::corpus::build_vocab(&all, LmConfig::new(LmKind::LstmLm).max_vocab);
    let ln_v = (vocab.len() as f64).ln();
    let mut worst: f64 = 0.0;
    for kind in LmKind::ALL {
        let lm = LanguageModel::<f32>::uniform(LmConfig::new(kind), vocab.len()).unwrap();
        let s = sentence_losses(&lm, &vocab, vh).unwrap();
        for l in s.losses {
            worst = worst.max((l - ln_v).abs());
        }
    }
    ensure(worst < 1e-6, || format!("uniform model off ln V by {worst:e}"))?;
    Ok(format!("variance human > machine: {}; uniform = ln V within {worst:.1e}", notes.join(", ")))
}

fn checkpoint_round_trips() -> Outcome {
    let records = toy_corpus(40, 3);
    for name in VariantName::ALL {
        let spec = variant_spec(name, Preset::Desk, &Overrides::default()).unwrap();
        let model = Model::for_training(spec, &records, 5).unwrap();
        let bytes = checkpoint_bytes(&model).unwrap();
        let loaded = checkpoint_from_bytes(&bytes).map_err(|e| format!("{name}: {e}"))?;
        ensure(checkpoint_bytes(&loaded).unwrap() == bytes, || format!("{name}: re-save differs"))?;
        for r in &records {
            let seq = model.tokenize(&r.text);
            let (a, b) = (model.logits(&seq).unwrap(), loaded.logits(&seq).unwrap());
            let same = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure(same, || format!("{name}: forward differs"))?;
        }
    }
    Ok("all 6 desk variants: byte-identical re-save, bit-identical logits".into())
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let f = fixture();
    let mut checked = Vec::new();
    for run in ["a", "b"] {
        let ck = p(&format!("{run}.ckpt"));
        let out = mgtd(&["train", "--train", &f, "--epochs", "3", "--out", &ck, "--history", &p(&format!("{run}.hist"))])?;
        std::fs::write(p(&format!("{run}.train.out")), String::from_utf8_lossy(&out).replace(&ck, "CKPT")).unwrap();
        let out = mgtd(&["eval", "--checkpoint", &ck, "--input", &f, "--format", "json"])?;
        std::fs::write(p(&format!("{run}.eval.out")), out).unwrap();
        let out = mgtd(&["search", "--train", &f, "--epochs", "2", "--out", &p(&format!("{run}.search"))])?;
        std::fs::write(p(&format!("{run}.search.out")), out).unwrap();
        let out = mgtd(&["probe", "--synthetic", "100", "--epochs", "2", "--out", &p(&format!("{run}.probe"))])?;
        std::fs::write(p(&format!("{run}.probe.out")), out).unwrap();
    }
    for suffix in [
        "ckpt", "hist", "train.out", "eval.out", "search", "search.out", "probe", "probe.out",
    ] {
        let a = std::fs::read(p(&format!("a.{suffix}"))).unwrap();
        let b = std::fs::read(p(&format!("b.{suffix}"))).unwrap();
        ensure(a == b, || format!("{suffix} differs"))?;
        checked.push(suffix);
    }
    Ok(format!("train, eval, search, probe outputs byte-identical ({} artifacts)", checked.len()))
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "parameter accounting",
            limit: Duration::from_secs(1),
            run: parameter_counts,
        },
        Criterion {
            id: 2,
            name: "gradient-check suite",
            limit: Duration::from_secs(120),
            run: gradient_checks,
        },
        Criterion {
            id: 3,
            name: "toy-corpus training",
            limit: Duration::from_secs(300),
            run: toy_training,
        },
        Criterion {
            id: 4,
            name: "metrics oracle",
            limit: Duration::from_secs(10),
            run: metrics_oracle,
        },
        Criterion {
            id: 5,
            name: "fixture statistics",
            limit: Duration::from_secs(30),
            run: fixture_stats,
        },
        Criterion {
            id: 6,
            name: "loss probe",
            limit: Duration::from_secs(300),
            run: loss_probe,
        },
        Criterion {
            id: 7,
            name: "checkpoint round-trip",
            limit: Duration::from_secs(30),
            run: checkpoint_round_trips,
        },
        Criterion {
            id: 8,
            name: "CLI determinism",
            limit: Duration::from_secs(300),
            run: cli_determinism,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; took {elapsed:.2?} > {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{}] {}: {detail} ({elapsed:.2?} < {:?})", c.id, c.name, c.limit),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{}] {}: {detail} ({elapsed:.2?})", c.id, c.name);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
