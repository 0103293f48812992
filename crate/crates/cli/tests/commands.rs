use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqtt-ids"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, rows: &str) -> std::path::PathBuf {
    let csv = dir.join("data.csv");
    ok(&[
        "synth",
        "--out",
        p(&csv),
        "--rows-per-class",
        rows,
        "--seed",
        "3",
    ]);
    csv
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_byte_stable_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), "20");
    let first = fs::read(&a).unwrap();
    ok(&[
        "synth",
        "--out",
        p(&a),
        "--rows-per-class",
        "20",
        "--seed",
        "3",
    ]);
    assert_eq!(fs::read(&a).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert!(text.lines().next().unwrap().ends_with(",target"));

    let bad = cli(&[
        "synth",
        "--out",
        p(&tmp.path().join("x.csv")),
        "--rows-per-class",
        "0",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn prepare_writes_replayable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth(tmp.path(), "40");
    let out = tmp.path().join("prep");
    ok(&["prepare", "--dataset", p(&csv), "--output-dir", p(&out)]);
    for f in ["train.csv", "test.csv", "artifacts.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let artifacts = json(&out.join("artifacts.json"));
    assert_eq!(artifacts["split"]["train"].as_array().unwrap().len(), 96);
    assert_eq!(
        artifacts["categorical"]["columns"]
            .as_array()
            .unwrap()
            .len(),
        4
    );

    let again = tmp.path().join("prep2");
    ok(&["prepare", "--dataset", p(&csv), "--output-dir", p(&again)]);
    for f in ["train.csv", "test.csv", "artifacts.json"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }

    let missing = cli(&[
        "prepare",
        "--dataset",
        p(&tmp.path().join("nope.csv")),
        "--output-dir",
        p(&out),
    ]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));
}

#[test]
fn config_file_with_unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"dataset": "x.csv", "split": 0.5}"#).unwrap();
    let out = cli(&["prepare", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(
        &cfg,
        r#"{"dataset": "x.csv", "model": {"kind": "perceptron"}}"#,
    )
    .unwrap();
    assert_eq!(
        cli(&["prepare", "--config", p(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn select_train_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth(tmp.path(), "40");
    let out = tmp.path().join("run");
    let base = ["--dataset", p(&csv), "--output-dir", p(&out)];
    ok(&[&["prepare"], &base[..]].concat());

    ok(&[&["select"], &base[..], &["--mode", "golden"]].concat());
    let sel = json(&out.join("selection.json"));
    assert_eq!(sel["selected"]["names"][0], "tcp.flags");
    assert_eq!(sel["selected"]["names"].as_array().unwrap().len(), 10);
    assert_eq!(sel["rankings"].as_array().unwrap().len(), 3);

    ok(&[
        &["select"],
        &base[..],
        &["--mode", "consensus", "--n", "10"],
    ]
    .concat());
    assert_eq!(
        json(&out.join("selection.json"))["selected"]["names"]
            .as_array()
            .unwrap()
            .len(),
        10
    );

    let bad = cli(&[
        &["select"],
        &base[..],
        &["--mode", "manual", "--features", "tcp.len,nope"],
    ]
    .concat());
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("missing column `nope`"));

    ok(&[&["train"], &base[..], &["--kind", "stacking"]].concat());
    let model = json(&out.join("model.json"));
    assert_eq!(model["kind"], "stacking");
    assert_eq!(model["payload"]["bases"].as_array().unwrap().len(), 4);
    assert_eq!(model["payload"]["meta"]["kind"], "random_forest");
    assert!(
        json(&out.join("training.json"))["fit_time_s"]
            .as_f64()
            .unwrap()
            >= 0.0
    );

    ok(&[&["train"], &base[..], &["--kind", "voting"]].concat());
    let model = json(&out.join("model.json"));
    let kinds: Vec<&str> = model["payload"]["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["random_forest", "decision_tree", "knn", "gbt"]);

    ok(&[
        "evaluate",
        "--model",
        p(&out.join("model.json")),
        "--prepared",
        p(&out),
    ]);
    let report = json(&out.join("report.json"));
    assert_eq!(report["accuracy"], 1.0);
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("Training time | Test time"));
    assert!(md.contains("| Voting | Bruteforce: 0 |"));

    fs::write(out.join("model.json"), "{\"version\": ").unwrap();
    let corrupt = cli(&[
        "evaluate",
        "--model",
        p(&out.join("model.json")),
        "--prepared",
        p(&out),
    ]);
    assert_eq!(corrupt.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&corrupt.stderr).contains("malformed"));
}

#[test]
fn invalid_hyperparameter_exits_with_config_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"model": {"kind": "knn", "hyperparameters": {"k": 0}}}"#,
    )
    .unwrap();
    let out = cli(&["train", "--config", p(&cfg), "--prepared", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid hyperparameter"));
}

#[test]
fn compare_emits_seven_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth(tmp.path(), "30");
    let out = tmp.path().join("cmp");
    ok(&[
        "compare",
        "--dataset",
        p(&csv),
        "--output-dir",
        p(&out),
        "--folds",
        "0",
    ]);
    let r = json(&out.join("compare.json"));
    let labels: Vec<&str> = r["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels.len(), 7);
    for l in [
        "Stacking", "Voting", "Bagging", "RF", "DT", "KNN", "XGBoost",
    ] {
        assert!(labels.contains(&l), "{l}");
    }
    let md = fs::read_to_string(out.join("compare.md")).unwrap();
    assert_eq!(
        md.lines()
            .filter(|l| l.starts_with("| ") && l.contains(" | "))
            .count(),
        1 + 7 + 1 + 21
    );
}
