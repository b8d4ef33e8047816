use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn onn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onn"))
        .args(args)
        .current_dir(root())
        .env_remove("ONN_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = onn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Exit code and the parsed single-line stderr error.
fn failure(args: &[&str]) -> (i32, Value) {
    let out = onn(args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    (out.status.code().unwrap(), serde_json::from_str(stderr.trim_end()).unwrap())
}

#[test]
fn train_report_has_accuracy_and_model_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&["train", "-c", "configs/cancer.json", "--output-dir", dir.to_str().unwrap()]);
    }
    let acc = json(&a.join("report.json"))["digital_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(std::fs::read(a.join("model.json")).unwrap(), std::fs::read(b.join("model.json")).unwrap());
}

#[test]
fn replaying_config_echo_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let f = first.to_str().unwrap();
    ok(&["train", "-c", "configs/cancer.json", "--output-dir", f, "--set", "train.epochs=300"]);
    ok(&["simulate", "-c", "configs/cancer.json", "--output-dir", f, "--set", "train.epochs=300", "--set", "chain.impairments.electrical_snr_db=30"]);

    let echo = tmp.path().join("echo.json");
    let report = json(&first.join("report.json"));
    std::fs::write(&echo, serde_json::to_string(&report["config_echo"]).unwrap()).unwrap();
    let s = second.to_str().unwrap();
    let e = echo.to_str().unwrap();
    ok(&["train", "-c", e, "--output-dir", s]);
    ok(&["simulate", "-c", e, "--output-dir", s]);
    for name in ["model.json", "report.json", "predictions.jsonl"] {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exported_trace_agrees_with_simulation_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    ok(&["train", "-c", "configs/digits.json", "--output-dir", d, "--set", "train.epochs=200"]);
    ok(&["simulate", "-c", "configs/digits.json", "--output-dir", d]);
    ok(&["export-trace", "-c", "configs/digits.json", "--output-dir", d, "--sample-index", "5"]);

    let report = json(&tmp.path().join("report.json"));
    let record = &report["per_sample"][5];
    let meta = json(&tmp.path().join("trace_5/trace_meta.json"));
    let detected = std::fs::read_to_string(tmp.path().join("trace_5/detected.csv")).unwrap();
    let values: Vec<f64> = detected
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let sps = meta["samples_per_symbol"].as_u64().unwrap() as usize;
    assert_eq!(values.len(), (2 * 49 - 1 + 3) * sps);

    let centre = values[48 * sps + sps / 2];
    let pad = meta["frame"]["pad_start_slot"].as_u64().unwrap() as usize;
    let reference = values[(pad + 1) * sps + sps / 2];
    let scale = report["weight_scale"].as_f64().unwrap();
    let dot = record["dot_estimate"].as_f64().unwrap();
    assert!((centre / reference * scale - dot).abs() <= 1e-12 * dot.abs().max(1.0));
    assert_eq!(meta["dot_estimate"], record["dot_estimate"]);
}

#[test]
fn per_channel_export_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    ok(&["train", "-c", "configs/cancer.json", "--output-dir", d, "--set", "train.epochs=10"]);
    ok(&["export-trace", "-c", "configs/cancer.json", "--output-dir", d]);
    assert!(!tmp.path().join("trace_0/channels").exists());
    ok(&["export-trace", "-c", "configs/cancer.json", "--output-dir", d, "--per-channel"]);
    let n = std::fs::read_dir(tmp.path().join("trace_0/channels")).unwrap().count();
    assert_eq!(n, 30 + 1);
}

#[test]
fn single_value_sweep_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    ok(&["train", "-c", "configs/cancer.json", "--output-dir", d, "--set", "train.epochs=100"]);
    let out = ok(&["sweep", "-c", "configs/cancer.json", "--output-dir", d, "--axis", "shaper_range_db", "--values", "20", "--seeds", "2"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().collect::<Vec<_>>()[0], "value,mean_accuracy,std");
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(std::fs::read_to_string(tmp.path().join("sweep_shaper_range_db.csv")).unwrap(), csv);
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"task": "cancer", "split": {"n_train": 100, "n_test": 10, "seed": 1}, "train": {"epochs": 5}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_onn"))
        .args(["train", "-c", cfg.to_str().unwrap()])
        .current_dir(root())
        .env("ONN_OUTPUT_DIR", tmp.path().join("env_out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("env_out/model.json").exists());
}

#[test]
fn empty_test_set_is_an_empty_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    ok(&["train", "-c", "configs/cancer.json", "--output-dir", d, "--set", "train.epochs=5", "--set", "split.n_test=0"]);
    let (code, err) = failure(&["simulate", "-c", "configs/cancer.json", "--output-dir", d, "--set", "split.n_test=0"]);
    assert_eq!(code, 3);
    assert!(err["message"].as_str().unwrap().contains("empty"), "{err}");
}

#[test]
fn failures_exit_with_class_codes_and_one_json_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_plan = tmp.path().join("plan.json");
    std::fs::write(&bad_plan, r#"{"layers": [{"input_dim": 4}], "tau_ps": 84, "bit_depth": 8}"#).unwrap();
    let (code, err) = failure(&["plan", bad_plan.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err["message"].as_str().unwrap().contains("layers[0]"), "{err}");

    std::fs::write(&bad_plan, "{ not json").unwrap();
    assert_eq!(failure(&["plan", bad_plan.to_str().unwrap()]).0, 3);

    assert_eq!(failure(&["sweep", "-c", "configs/digits.json", "--axis", "temperature", "--values", "1"]).0, 2);
    assert_eq!(failure(&["no-such-command"]).0, 2);
    assert_eq!(failure(&["train", "-c", "configs/digits.json", "--set", "oops"]).0, 2);

    let d = tmp.path().to_str().unwrap();
    let (code, err) = failure(&["train", "-c", "configs/cancer.json", "--output-dir", d, "--set", "train.learning_rate=1e308", "--set", "train.epochs=20"]);
    assert_eq!((code, err["error"].as_str().unwrap()), (4, "numeric"));

    ok(&["train", "-c", "configs/cancer.json", "--output-dir", d, "--set", "train.epochs=5"]);
    let (code, err) = failure(&["export-trace", "-c", "configs/cancer.json", "--output-dir", d, "--sample-index", "75"]);
    assert_eq!(code, 3);
    assert!(err["message"].as_str().unwrap().contains("75"));

    let (code, _) = failure(&["simulate", "-c", "configs/digits.json", "--model", &format!("{d}/model.json")]);
    assert_eq!(code, 3);

    let (code, err) = failure(&["train", "-c", "configs/digits.json", "--output-dir", d, "--set", "paths.mnist_images=missing.idx"]);
    assert_eq!(code, 3);
    assert!(err["message"].as_str().unwrap().contains("missing.idx"));
}

#[test]
fn table1_lists_every_row() {
    let csv = String::from_utf8(ok(&["table1"]).stdout).unwrap();
    assert_eq!(csv.lines().count(), 8);
    let parsed: Value = serde_json::from_slice(&ok(&["table1", "--format", "json"]).stdout).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 7);
    assert_eq!(parsed[6]["latency"], ">18.68 ns");
}

#[test]
fn inputs_are_left_untouched() {
    let before = std::fs::read(root().join("configs/cancer.json")).unwrap();
    let data_before = std::fs::metadata(root().join("data/wdbc.data")).unwrap().modified().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    ok(&["train", "-c", "configs/cancer.json", "--output-dir", tmp.path().to_str().unwrap(), "--set", "train.epochs=5"]);
    assert_eq!(std::fs::read(root().join("configs/cancer.json")).unwrap(), before);
    assert_eq!(std::fs::metadata(root().join("data/wdbc.data")).unwrap().modified().unwrap(), data_before);
}
