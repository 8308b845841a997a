use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &str = r#"{
  "seed": 11,
  "dataset": {"source": "synthetic", "num_classes": 2, "videos_per_class": 4, "frames_per_video": 6, "groups": 2},
  "model": {
    "lstm_hidden": 6, "structural_head_hidden": 6, "frame_head_hidden": 6, "stack_len": 3,
    "learning_rate": 0.1, "epochs": 3, "batch_size": 8
  },
  "fusion": {"C": 1.0, "iterations": 300, "validation_fraction": 0.25},
  "eval": {"mode": "loso"}
}"#;

fn ipred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipred"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ipred(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line");
    let v: Value = serde_json::from_str(line).expect("machine-readable error");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn pipeline(config: &Path, out: &Path) {
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    for cmd in ["synth", "featurize", "train", "fuse", "eval"] {
        ok(&[cmd, "--config", c, "--out", o]);
    }
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&config, &a);
    for f in [
        "dataset/meta.json",
        "dataset/c1_v000/frame_000.png",
        "features.jsonl",
        "folds/group_0/spatial.json",
        "folds/group_1/temporal_structural.json",
        "folds/group_1/weights.json",
        "eval/ratio_table.csv",
        "eval/predictions.csv",
        "eval/report.json",
    ] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(a.join("eval/ratio_table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert_eq!(csv.lines().next(), Some("ratio,accuracy"));

    pipeline(&config, &b);
    for f in [
        "features.jsonl",
        "folds/group_0/temporal.json",
        "folds/group_1/weights.json",
        "eval/report.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let r = report(&a.join("eval/report.json"));
    let hash = r["config_hash"].as_str().unwrap();
    let ck = report(&a.join("folds/group_0/spatial.json"));
    assert_eq!(ck["config_hash"].as_str().unwrap(), hash);
}

#[test]
fn commands_leave_inputs_untouched_and_reuse_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("o");
    pipeline(&config, &out);
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    let features = fs::read(out.join("features.jsonl")).unwrap();
    let weights = fs::read(out.join("folds/group_0/weights.json")).unwrap();
    let first = fs::read(out.join("eval/report.json")).unwrap();
    ok(&["eval", "--config", c, "--out", o]);
    ok(&["fuse", "--config", c, "--out", o]);
    assert_eq!(fs::read(out.join("features.jsonl")).unwrap(), features);
    assert_eq!(
        fs::read(out.join("folds/group_0/weights.json")).unwrap(),
        weights
    );
    assert_eq!(fs::read(out.join("eval/report.json")).unwrap(), first);
    assert_eq!(fs::read(&config).unwrap(), TINY.as_bytes());
}

#[test]
fn forced_average_weights_reproduce_baseline_and_predict_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("o");
    pipeline(&config, &out);
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());

    let avg = dir.path().join("average.json");
    fs::write(
        &avg,
        r#"{"row_order": ["spatial", "temporal", "spatial_structural", "temporal_structural"],
            "w": [0.25, 0.25, 0.25, 0.25], "C": 1.0, "iterations": 0}"#,
    )
    .unwrap();
    ok(&[
        "eval",
        "--config",
        c,
        "--out",
        o,
        "--weights",
        avg.to_str().unwrap(),
    ]);
    let learned = report(&out.join("eval/report.json"));
    let forced = report(&out.join("eval_average/report.json"));
    assert_eq!(forced["table"], learned["average_table"]);

    for video in learned["videos"].as_array().unwrap() {
        let id = video["id"].as_str().unwrap();
        let text = ok(&[
            "predict",
            "--config",
            c,
            "--out",
            o,
            "--video",
            id,
            "--ratio",
            "10",
            "--verbose",
        ]);
        let p: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(p["p_star"], video["predictions"][9]);
        assert_eq!(p["steps"].as_array().unwrap().len(), 6);
        let text = ok(&[
            "predict", "--config", c, "--out", o, "--video", id, "--ratio", "3",
        ]);
        let p: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(p["p_star"], video["predictions"][2]);
        assert!(p.get("steps").is_none());
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let c = config.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["synth", "--config", c, "--out", a.to_str().unwrap()]);
    ok(&[
        "synth",
        "--config",
        c,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "12",
    ]);
    assert_ne!(
        fs::read(a.join("dataset/c1_v000/frame_000.png")).unwrap(),
        fs::read(b.join("dataset/c1_v000/frame_000.png")).unwrap()
    );
}

#[test]
fn failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();

    let missing = ipred(&["train", "--config", "/nonexistent/config.json", "--out", o]);
    assert_eq!(error_kind(&missing), "io");

    let bad = write_config(dir.path(), r#"{"dataset": {"source": "synthetic"}}"#);
    assert_eq!(
        error_kind(&ipred(&[
            "synth",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            o
        ])),
        "config"
    );

    let config = write_config(dir.path(), TINY);
    let c = config.to_str().unwrap();
    assert_eq!(
        error_kind(&ipred(&["train", "--config", c, "--out", o])),
        "io"
    );
    ok(&["synth", "--config", c, "--out", o]);
    ok(&["featurize", "--config", c, "--out", o]);
    assert_eq!(
        error_kind(&ipred(&["eval", "--config", c, "--out", o])),
        "missing"
    );
    ok(&["train", "--config", c, "--out", o]);
    assert_eq!(
        error_kind(&ipred(&["eval", "--config", c, "--out", o])),
        "missing"
    );

    let wider = write_config(
        dir.path(),
        &TINY.replace("\"lstm_hidden\": 6", "\"lstm_hidden\": 7"),
    );
    assert_eq!(
        error_kind(&ipred(&[
            "fuse",
            "--config",
            wider.to_str().unwrap(),
            "--out",
            o
        ])),
        "checkpoint_mismatch"
    );
    let config = write_config(dir.path(), TINY);
    let c = config.to_str().unwrap();
    assert_eq!(
        error_kind(&ipred(&[
            "predict", "--config", c, "--out", o, "--video", "c1_v000", "--ratio", "11"
        ])),
        "usage"
    );
    assert_eq!(
        error_kind(&ipred(&[
            "predict", "--config", c, "--out", o, "--video", "nope"
        ])),
        "missing"
    );
}
