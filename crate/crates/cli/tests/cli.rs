use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsa2_core::data::{fixture_scenarios, WeatherDataset};
use rsa2_core::learn::{Checkpoint, FrProblem};
use serde_json::{json, Value};

fn rsa2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsa2")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rsa2(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_toy(dir: &Path) -> PathBuf {
    let path = dir.join("toy.json");
    let toy = json!({
        "meanings": ["some-not-all", "all"],
        "utterances": ["some", "all"],
        "denotation": {"some": ["some-not-all", "all"], "all": ["all"]}
    });
    std::fs::write(&path, toy.to_string()).unwrap();
    path
}

#[test]
fn toy_run_gives_the_scalar_implicature() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy(dir.path());
    let out = dir.path().join("out");
    ok(&["run", "--model", "rsa", "--dataset", s(&toy), "--out", s(&out)]);
    let d = read_json(&out.join("distributions.json"));
    let l1 = &d["l1"]["default"]["some"];
    assert!((l1["some-not-all"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((l1["all"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(d["l1"]["default"]["all"]["some-not-all"], 0.0);
    let csv = std::fs::read_to_string(out.join("distributions_l1.csv")).unwrap();
    assert!(csv.starts_with("model,context,utterance,meaning,probability\nrsa-l1,"));
}

#[test]
fn numbers_run_covers_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["run", "--model", "rsa2", "--dataset", "numbers", "--alpha", "1", "--strategy-prior", "uniform", "--out", s(&out)]);
    assert_eq!(read_json(&out.join("summary.json"))["pairs"], 30);
    let d = read_json(&out.join("distributions.json"));
    let contexts = d["l1"].as_object().unwrap();
    assert_eq!(contexts.len(), 3);
    for by_u in contexts.values() {
        let by_u = by_u.as_object().unwrap();
        assert_eq!(by_u.len(), 10);
        for cell in by_u.values() {
            let total: f64 = cell.as_object().unwrap().values().map(|p| p.as_f64().unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
    let resolved = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("alpha = 1.0") && resolved.contains("strategy_prior = \"uniform\""));
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["run", "--dataset", "scenarios", "--strategy-prior", "provider", "--alts", "8", "--shuffles", "3", "--seed", "4", "--out", s(out)]);
    }
    let (x, y) = (dir_bytes(&a), dir_bytes(&b));
    assert_eq!(x.len(), 6);
    for ((n1, b1), (n2, b2)) in x.iter().zip(&y) {
        assert_eq!(n1, n2);
        if n1 != "config.resolved.toml" {
            assert!(b1 == b2, "{n1} differs");
        }
    }
}

#[test]
fn replayed_run_matches_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = ["run", "--dataset", "scenarios", "--model", "rsa", "--alts", "6", "--shuffles", "2"];
    ok(&[&common[..], &["--cache", s(&cache), "--out", s(&a)]].concat());
    ok(&[&common[..], &["--provider", "replay", "--cache", s(&cache), "--out", s(&b)]].concat());
    for f in ["distributions.json", "distributions_l0.csv", "distributions_l1.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn mad_of_a_run_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["run", "--model", "rsa2", "--dataset", "weather", "--out", s(&out)]);
    let csv = dir.path().join("mad.csv");
    let text = ok(&["eval", "--pred", s(&out), "--human", s(&out), "--metric", "mad", "--csv", s(&csv)]);
    assert!(text.contains("0.000000"), "{text}");
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), "metric,pairs,cells,value\nmad,45,225,0.000000\n");
    // CSV and JSON views of the same run line up.
    let l0 = ok(&["eval", "--pred", s(&out.join("distributions_l0.csv")), "--human", s(&out), "--metric", "mad", "--level", "l0"]);
    assert!(l0.contains("0.000000"));
}

#[test]
fn meaning_scores_of_a_delta_listener() {
    let dir = tempfile::tempdir().unwrap();
    let mut root = serde_json::Map::new();
    for sc in fixture_scenarios() {
        let cell: serde_json::Map<String, Value> = sc
            .meanings
            .iter()
            .map(|m| (m.role.label().to_string(), json!(if m.role == sc.intended_role { 1.0 } else { 0.0 })))
            .collect();
        root.insert(sc.id.clone(), json!({ sc.utterance.clone(): cell }));
    }
    let pred = dir.path().join("delta.json");
    std::fs::write(&pred, Value::Object(root).to_string()).unwrap();
    let csv = dir.path().join("scores.csv");
    ok(&["eval", "--pred", s(&pred), "--human", "scenarios", "--metric", "meaning-scores", "--csv", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let overall: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&overall[..5], ["overall", "8", "1.0000", "0.0000", "0.0000"]);
}

#[test]
fn rs_report_averages_fixture_constants() {
    // Validation items get P(irony) 0.9 when ironic and 0.4 when literal,
    // test items 0.7 and 0.2.
    let dir = tempfile::tempdir().unwrap();
    let mut root = serde_json::Map::new();
    for sc in fixture_scenarios() {
        let validation = matches!(sc.split, rsa2_core::data::Split::Validation);
        let ironic = sc.intended_role == rsa2_core::data::MeaningRole::Nonliteral;
        let p = match (ironic, validation) {
            (true, true) => 0.9,
            (true, false) => 0.7,
            (false, true) => 0.4,
            (false, false) => 0.2,
        };
        root.insert(sc.id.clone(), json!({ sc.utterance.clone(): {"literal": 1.0 - p, "irony": p} }));
    }
    let pred = dir.path().join("posteriors.json");
    std::fs::write(&pred, json!({ "posterior": root }).to_string()).unwrap();
    let csv = dir.path().join("rs.csv");
    ok(&["eval", "--pred", s(&pred), "--human", "scenarios", "--metric", "rs-report", "--csv", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "group,irony,literal");
    assert!(rows.contains(&"overall,0.5500,0.4500"));
    assert!(rows.contains(&"split:validation,0.6500,0.3500"));
    assert!(rows.contains(&"intended:nonliteral,0.8000,0.2000"));
    assert!(rows.contains(&"intended:literal,0.3000,0.7000"));
}

#[test]
fn rsc_report_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["rsc", "--k", "4", "--alts", "20", "--shuffles", "3", "--seed", "11", "--out", s(&out)]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/rsc_report.json");
    assert_eq!(std::fs::read_to_string(out.join("rsc_dress-ironic.json")).unwrap(), std::fs::read_to_string(golden).unwrap());
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["model"], "rsc");
    assert_eq!(summary["scenarios"], 8);
}

#[test]
fn zero_epochs_returns_the_initial_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["train-fr", "--epochs", "0", "--seed", "3", "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("history.csv")).unwrap(), "epoch,train_loss,val_loss\n");
    let ck = Checkpoint::from_json(&std::fs::read_to_string(out.join("checkpoint.json")).unwrap()).unwrap();
    let problem = FrProblem::weather(&WeatherDataset::fixture().priors, 1.0).unwrap();
    assert_eq!(ck.net, problem.new_net(16, 3));
    assert_eq!(read_json(&out.join("summary.json"))["best_epoch"], 0);
}

#[test]
fn training_on_synthetic_data_halves_the_loss() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&["train-fr", "--lr", "0.05", "--wd", "0", "--seed", "7", "--out", s(&out)]);
    let summary = read_json(&out.join("summary.json"));
    let (start, end) = (summary["initial_train_loss"].as_f64().unwrap(), summary["final_train_loss"].as_f64().unwrap());
    assert!(end <= start / 2.0, "{start} -> {end}");
    assert!(summary["train_agreement"].as_f64().unwrap() >= 0.9);
    assert_eq!(summary["epochs"], 500);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    std::fs::write(&cfg, format!("model = \"rsa\"\ndataset = \"weather\"\nalpha = 2.0\noutput = {:?}\n", s(&out))).unwrap();
    ok(&["run", "--config", s(&cfg), "--alpha", "3"]);
    let resolved = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("alpha = 3.0") && resolved.contains("model = \"rsa\""));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = |args: &[&str]| rsa2(args).status.code().unwrap();

    assert_eq!(code(&["run", "--dataset", "missing.json", "--out", s(&out)]), 2);
    let bad_toml = dir.path().join("bad.toml");
    std::fs::write(&bad_toml, "alpah = 1.0\n").unwrap();
    assert_eq!(code(&["run", "--config", s(&bad_toml)]), 2);

    let broken = dir.path().join("broken.jsonl");
    std::fs::write(&broken, "{\"id\": \"x\"}\n").unwrap();
    assert_eq!(code(&["run", "--dataset", s(&broken), "--out", s(&out)]), 3);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let args = ["run", "--dataset", "scenarios", "--provider", "replay", "--cache", s(&empty), "--out", s(&out)];
    assert_eq!(code(&args), 4);

    // An utterance true of nothing has no literal listener.
    let toy = dir.path().join("empty_denotation.json");
    let spec = json!({"meanings": ["a", "b"], "utterances": ["x", "y"], "denotation": {"x": ["a"], "y": []}});
    std::fs::write(&toy, spec.to_string()).unwrap();
    assert_eq!(code(&["run", "--model", "rsa", "--dataset", s(&toy), "--out", s(&out)]), 5);
}

#[test]
fn probe_echoes_a_raw_request() {
    let text = ok(&["probe", "--request", r#"{"kind": "embed", "texts": ["Nice day."]}"#]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["provider"], "mock");
    assert_eq!(v["response"]["vectors"][0].as_array().unwrap().len(), 32);
}
