use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixture.jsonl")
}

fn mgtd(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mgtd"));
    c.args(args).env_remove("MGT_SEED").stdin(Stdio::null());
    c
}

fn run(args: &[&str]) -> Output {
    mgtd(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    serde_json::from_str(&ok(&a)).unwrap()
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

#[test]
fn stats_reproduces_the_fixture_grid() {
    let f = fixture();
    let a = ok(&["stats", "--input", f.to_str().unwrap()]);
    assert_eq!(a, FIXTURE_GRID);
    assert_eq!(a, ok(&["stats", "--input", f.to_str().unwrap()]));
    let v = json(&["stats", "--input", f.to_str().unwrap()]);
    assert_eq!(v["total"], 40);
    assert_eq!(v["counts"]["wikipedia"]["davinci"], 3);
    assert_eq!(v["totals_by_generator"]["human"], 20);
}

#[test]
fn params_audit() {
    let out = ok(&["params", "--variant", "bilstm_frozen", "--preset", "base"]);
    assert!(out.contains("3,675,138") && out.contains("≈4M"), "{out}");
    let v = json(&["params"]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let total = |name: &str| {
        rows.iter()
            .find(|r| r["variant"] == name)
            .map(|r| r["total"].as_u64().unwrap())
            .unwrap()
    };
    assert_eq!(total("lora_frozen"), 737_280 + 1_538);
    assert_eq!(total("bilstm_frozen"), 3_675_138);
    assert_eq!(total("gru_frozen"), 2_756_610);
    assert_eq!(total("bilstm_unfrozen2"), 17_850_882);
    let full = total("full_finetune") as f64;
    assert!((full / 124e6 - 1.0).abs() < 0.02, "{full}");
}

#[test]
fn usage_errors() {
    for args in [
        &["predict"][..],
        &["frobnicate"],
        &["stats"],
        &["params", "--variant", "bogus"],
        &["train", "--out", "x", "--bogus-flag"],
        &["eval", "--checkpoint", "x"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
        assert!(o.stdout.is_empty());
    }
    let o = mgtd(&["params"]).env("MGT_SEED", "not-a-number").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"text\": \"hi\", \"label\": 1, \"model\": \"x\"}\nnot json\n").unwrap();
    let o = run(&["stats", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1") || err.contains("line 2"), "{err}");

    let garbage = dir.path().join("g.ckpt");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let o = run(&["predict", "--checkpoint", garbage.to_str().unwrap(), "--input", fixture().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn train_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["train", "--train", data, "--epochs", "2", "--out", out]
}

#[test]
fn train_eval_predict_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let data = f.to_str().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (a, b, c) = (p("a.ckpt"), p("b.ckpt"), p("c.ckpt"));

    let out_a = ok(&train_args(data, &a));
    let out_b = ok(&train_args(data, &b));
    assert_eq!(out_a.replace(&a, ""), out_b.replace(&b, ""));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let mut other_seed = train_args(data, &c);
    other_seed.extend(["--seed", "7"]);
    ok(&other_seed);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());

    let eval = |ck: &str| ok(&["eval", "--checkpoint", ck, "--input", data]);
    assert_eq!(eval(&a), eval(&b));
    let report = json(&["eval", "--checkpoint", &a, "--checkpoint", &c, "--input", data]);
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for key in ["model", "accuracy", "f1_macro", "f1_pos", "precision_pos", "recall_pos", "trainable_params"] {
        assert!(rows[0].get(key).is_some(), "{key}");
    }

    let texts = dir.path().join("texts.txt");
    std::fs::write(&texts, "first document here\n\nsecond one\n").unwrap();
    let preds = json(&["predict", "--checkpoint", &a, "--input", texts.to_str().unwrap()]);
    let preds = preds.as_array().unwrap();
    assert_eq!(preds.len(), 2);
    assert_eq!(preds[1]["line"], 3);
    let prob = preds[0]["prob_machine"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&prob));

    let piped = mgtd(&["predict", "--checkpoint", &a, "--format", "json"])
        .stdin(std::fs::File::open(&texts).unwrap())
        .output()
        .unwrap();
    assert_eq!(serde_json::from_slice::<Value>(&piped.stdout).unwrap().as_array().unwrap().len(), 2);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let data = f.to_str().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (flag, env, other) = (p("flag.ckpt"), p("env.ckpt"), p("other.ckpt"));
    let mut args = train_args(data, &flag);
    args.extend(["--seed", "31"]);
    ok(&args);
    let o = mgtd(&train_args(data, &env)).env("MGT_SEED", "31").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    ok(&train_args(data, &other));
    assert_eq!(std::fs::read(&flag).unwrap(), std::fs::read(&env).unwrap());
    assert_ne!(std::fs::read(&flag).unwrap(), std::fs::read(&other).unwrap());
}

#[test]
fn search_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let data = f.to_str().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let args = |out: &Path| {
        vec![
            "search".to_string(),
            "--train".into(),
            data.into(),
            "--epochs".into(),
            "2".into(),
            "--strategy".into(),
            "random".into(),
            "--trials".into(),
            "3".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let sa = ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    let sb = ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(sa, sb);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let log: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(log["ranked"].as_array().unwrap().len(), 3);
}

#[test]
fn probe_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (a, b, csv) = (p("a.json"), p("b.json"), p("csv"));
    let base = ["probe", "--synthetic", "60", "--epochs", "2"];
    let mut args_a = base.to_vec();
    args_a.extend(["--out", &a, "--csv-dir", &csv]);
    let mut args_b = base.to_vec();
    args_b.extend(["--out", &b]);
    assert_eq!(ok(&args_a), ok(&args_b));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
    assert_eq!(std::fs::read_dir(&csv).unwrap().count(), 8);

    let f = fixture();
    let v = json(&["probe", "--input", f.to_str().unwrap(), "--lm", "lstm_lm", "--epochs", "1"]);
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[test]
fn embeddings_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let data = f.to_str().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (emb, head) = (p("f.emb"), p("h.ckpt"));
    let v = json(&["embed", "--input", data, "--out", &emb]);
    assert_eq!(v["records"], 40);
    ok(&["train", "--embeddings", &emb, "--epochs", "2", "--out", &head]);
    let report = json(&["eval", "--checkpoint", &head, "--embeddings", &emb]);
    assert_eq!(report[0]["model"], "bilstm_frozen");
    let o = run(&["eval", "--checkpoint", &head, "--input", data]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let v = json(&["gradcheck", "--max-coords", "16"]);
    let cases = v["cases"].as_array().unwrap();
    assert!(cases.len() >= 20);
    let o = run(&["gradcheck", "--tolerance", "1e-30"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn field_remapping() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("remap.jsonl");
    std::fs::write(
        &path,
        "{\"body\":\"a\",\"is_machine\":0,\"gen\":\"human\",\"site\":\"x\"}\n\
         {\"body\":\"b\",\"is_machine\":1,\"gen\":\"gpt\",\"site\":\"x\"}\n",
    )
    .unwrap();
    let v = json(&[
        "stats",
        "--input",
        path.to_str().unwrap(),
        "--text-field",
        "body",
        "--label-field",
        "is_machine",
        "--generator-field",
        "gen",
        "--domain-field",
        "site",
    ]);
    assert_eq!(v["counts"]["x"]["gpt"], 1);
}
