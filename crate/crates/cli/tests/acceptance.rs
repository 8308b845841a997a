//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ipred_core::context::{ContextSequence, FeatureVector};
use ipred_core::eval::slice_observation;
use ipred_core::fusion::{
    build_pairs, nonneg_project_retrain, ranking_objective, RankPair, RankerConfig, ScoreMatrix,
};
use ipred_core::models::{
    lstm_step, pad_flow_sequence, Classifier, ClassifierHead, LstmParams, LstmState, ModelKind,
    Parameterized, StructuralModel,
};
use ipred_core::numerics::{grad_check, softmax, Rng};
use ipred_core::prediction::{majority_vote, per_step_label};
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = Rng::new(1000 + seed);
        let model =
            StructuralModel::new(ModelKind::SpatialStructural, 3, 4, 5, 3, &mut rng).unwrap();
        let seq = ContextSequence::new(
            (0..7)
                .map(|_| {
                    FeatureVector::new((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let label = rng.below(3);
        let mut grad = model.zeros_like();
        model.backward(&seq, label, &mut grad).unwrap();
        let mut params = model.flat();
        let mut probe = model.clone();
        let err = grad_check(
            |p| {
                probe.set_flat(p);
                -probe.forward(&seq).unwrap()[label].ln()
            },
            &mut params,
            &grad.flat(),
            1e-5,
        )
        .unwrap();
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(10),
        format!("max relative error {worst:.2e} over 20 instances in {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = Rng::new(2);
    let lstm = LstmParams::zeros(5, 4);
    let mut state = LstmState::zeros(4);
    for _ in 0..7 {
        let x: Vec<f64> = (0..5).map(|_| rng.uniform(-10.0, 10.0)).collect();
        state = lstm_step(&lstm, &x, &state).unwrap().0;
        if state.hidden.iter().any(|&h| h != 0.0) {
            return Err(format!("zero LSTM produced h = {:?}", state.hidden));
        }
    }
    for m in 1..=8 {
        let head = ClassifierHead::zeros(6, 5, m);
        let x: Vec<f64> = (0..6).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let s = head.scores(&x).unwrap();
        if s.iter().any(|&p| p != 1.0 / m as f64) {
            return Err(format!("zero head with m = {m} gave {:?}", &*s));
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = 1 + rng.below(10);
        let z: Vec<f64> = (0..len).map(|_| rng.uniform(-20.0, 20.0)).collect();
        let c = rng.uniform(-50.0, 50.0);
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let (a, b) = (softmax(&z).unwrap(), softmax(&shifted).unwrap());
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    check(
        worst <= 1e-12,
        format!("h stays 0, zero heads exactly uniform, softmax shift error {worst:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let k = 7;
    for t in 1..=15usize {
        let flows: Vec<usize> = (1..=t).collect();
        let got = pad_flow_sequence(&flows, k).unwrap();
        let mut expected = Vec::new();
        if t >= k {
            for i in t - k + 1..=t {
                expected.push(i);
            }
        } else {
            for i in 1..=t {
                expected.push(i);
            }
            for _ in 0..k - t {
                expected.push(t);
            }
        }
        if got != expected {
            return Err(format!("t = {t}: {got:?} != {expected:?}"));
        }
    }
    Ok("all t in 1..=15 with k = 7 match the naive rule".into())
}

/// Minimum of the ranking objective along the ray `s·u`, `s ≥ 0`. The
/// objective is piecewise quadratic in `s` with breakpoints where a hinge
/// switches off, so the exact minimum is found by sweeping them in order.
fn ray_minimum(u: &[f64; 4], pairs: &[RankPair], c: f64) -> f64 {
    let q: f64 = u.iter().map(|v| v * v).sum();
    let a: Vec<f64> = pairs
        .iter()
        .map(|p| p.y * u.iter().zip(&p.x).map(|(w, x)| w * x).sum::<f64>())
        .collect();
    let mut breaks: Vec<f64> = a.iter().filter(|&&v| v > 0.0).map(|v| 1.0 / v).collect();
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut by_break: Vec<f64> = a.iter().copied().filter(|&v| v > 0.0).collect();
    by_break.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut count = a.len() as f64;
    let mut sum_a: f64 = a.iter().sum();
    let mut lo = 0.0;
    let mut best = f64::INFINITY;
    for j in 0..=breaks.len() {
        let hi = breaks.get(j).copied().unwrap_or(f64::INFINITY);
        let s = (c * sum_a / (2.0 * q)).clamp(lo, hi);
        best = best.min(q * s * s + c * (count - s * sum_a));
        if j < breaks.len() {
            count -= 1.0;
            sum_a -= by_break[j];
            lo = hi;
        }
    }
    best
}

fn grid_minimum(pairs: &[RankPair], c: f64) -> f64 {
    let steps = 50;
    let mut best = ranking_objective(&[0.0; 4], pairs, c);
    for i in 0..=steps {
        for j in 0..=steps - i {
            for k in 0..=steps - i - j {
                let l = steps - i - j - k;
                let u = [i, j, k, l].map(|v| v as f64 / steps as f64);
                best = best.min(ray_minimum(&u, pairs, c));
            }
        }
    }
    best
}

fn fusion_case(rng: &mut Rng, uniform_rows: bool) -> Vec<(ScoreMatrix, usize)> {
    let m = 4;
    (0..60)
        .map(|i| {
            let label = i % m;
            // informative model: 0.9 on its pick, correct 90% of the time
            let pick = if rng.uniform(0.0, 1.0) < 0.9 {
                label
            } else {
                (label + 1 + rng.below(m - 1)) % m
            };
            let mut informative = vec![0.1 / (m - 1) as f64; m];
            informative[pick] = 0.9;
            let mut other = || {
                if uniform_rows {
                    vec![1.0 / m as f64; m]
                } else {
                    let raw: Vec<f64> = (0..m).map(|_| rng.uniform(0.0, 1.0)).collect();
                    let t: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / t).collect()
                }
            };
            let (a, b, c) = (other(), other(), other());
            (ScoreMatrix::new([a, informative, b, c]).unwrap(), label)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = RankerConfig::default();
    let mut details = Vec::new();
    for (name, uniform) in [("uniform rows", true), ("random rows", false)] {
        let mut rng = Rng::new(4);
        let pairs = build_pairs(&fusion_case(&mut rng, uniform)).unwrap();
        let fit = nonneg_project_retrain(&pairs, &cfg).map_err(|e| e.to_string())?;
        let w = fit.weights.values();
        let grid = grid_minimum(&pairs, cfg.c);
        let gap = (fit.objective - grid).abs() / grid;
        let top = w[1] > w[0] && w[1] > w[2] && w[1] > w[3];
        let ok = w.iter().all(|&v| v >= 0.0) && top && gap <= 0.02;
        let line = format!(
            "{name}: w = {w:.3?}, objective {:.4} vs grid {grid:.4} ({:.2}%)",
            fit.objective,
            gap * 100.0
        );
        if !ok {
            return Err(line);
        }
        details.push(line);
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!("{}; {elapsed:.2?}", details.join("; ")),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = Rng::new(5);
    for case in 0..100_000 {
        let m = 1 + rng.below(8);
        let c: Vec<f64> = if case % 2 == 0 {
            (0..m).map(|_| rng.uniform(0.0, 1.0)).collect()
        } else {
            // coarse values so ties are common
            (0..m).map(|_| rng.below(3) as f64 / 2.0).collect()
        };
        let mut oracle = 0;
        for i in 0..m {
            if c[i] > c[oracle] {
                oracle = i;
            }
        }
        if per_step_label(&c) != oracle {
            return Err(format!("argmax of {c:?}"));
        }
    }
    for _ in 0..10_000 {
        let len = 1 + rng.below(60);
        let m = 1 + rng.below(6);
        let labels: Vec<usize> = (0..len).map(|_| rng.below(m)).collect();
        let mut best = (0, 0);
        for class in 0..m {
            let n = labels.iter().filter(|&&l| l == class).count();
            if n > best.1 {
                best = (class, n);
            }
        }
        if majority_vote(&labels).unwrap() != best.0 {
            return Err(format!("vote of {labels:?}"));
        }
    }
    Ok("100000 argmax and 10000 vote cases match".into())
}

fn criterion_6() -> Outcome {
    for n in 1..=500usize {
        for i in 1..=10 {
            let expected = ((n * i) as f64 / 10.0).round().max(1.0) as usize;
            let got = slice_observation(n, i).unwrap();
            if got != expected {
                return Err(format!("n = {n}, i = {i}: {got} != {expected}"));
            }
        }
    }
    Ok("all n <= 500, i in 1..=10 match".into())
}

fn ipred(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ipred"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json")
}

fn run_pipeline(out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let config = desk_config();
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    for cmd in ["synth", "featurize", "train", "fuse", "eval"] {
        ipred(&[cmd, "--config", c, "--out", o])?;
    }
    Ok(start.elapsed())
}

fn load(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn at(table: &Value, i: usize) -> f64 {
    table[i - 1].as_f64().unwrap()
}

fn check_desk_config() -> Result<(), String> {
    let cfg = load(&desk_config())?;
    let (d, m) = (&cfg["dataset"], &cfg["model"]);
    let expected = [
        (d["num_classes"].as_u64(), 4),
        (d["videos_per_class"].as_u64(), 20),
        (d["frames_per_video"].as_u64(), 24),
        (d["groups"].as_u64(), 4),
        (m["lstm_hidden"].as_u64(), 32),
        (m["structural_head_hidden"].as_u64(), 16),
        (m["frame_head_hidden"].as_u64(), 16),
        (m["stack_len"].as_u64(), 7),
    ];
    if expected.iter().any(|(got, want)| *got != Some(*want)) {
        return Err("configs/desk.json does not hold the desk-scale settings".into());
    }
    Ok(())
}

fn criterion_7(out: &Path) -> Outcome {
    check_desk_config()?;
    let elapsed = run_pipeline(out)?;
    let r = load(&out.join("eval/report.json"))?;
    let t = &r["table"];
    let (first, last) = (at(t, 1), at(t, 10));
    let mut worst_margin = f64::INFINITY;
    for k in [
        "spatial",
        "temporal",
        "spatial_structural",
        "temporal_structural",
    ] {
        worst_margin = worst_margin.min(last - at(&r["model_tables"][k], 10));
    }
    check(
        last >= 0.90 && last >= first && worst_margin >= -0.02 && elapsed < Duration::from_secs(600),
        format!(
            "ratio 1.0 accuracy {last:.4}, ratio 0.1 {first:.4}, fused minus best single model {worst_margin:+.4}, {elapsed:.1?}"
        ),
    )
}

fn criterion_8(out: &Path, scratch: &Path) -> Outcome {
    let avg = scratch.join("average.json");
    fs::write(
        &avg,
        r#"{"row_order": ["spatial", "temporal", "spatial_structural", "temporal_structural"],
            "w": [0.25, 0.25, 0.25, 0.25], "C": 1.0, "iterations": 0}"#,
    )
    .map_err(|e| e.to_string())?;
    let config = desk_config();
    ipred(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--weights",
        avg.to_str().unwrap(),
    ])?;
    let learned = load(&out.join("eval/report.json"))?;
    let forced = load(&out.join("eval_average/report.json"))?;
    let reproduces = forced["table"] == learned["average_table"];
    let (fused, average) = (at(&learned["table"], 10), at(&forced["table"], 10));
    check(
        reproduces && fused >= average,
        format!("forced average reproduces baseline: {reproduces}; ratio 1.0 learned {fused:.4} vs average {average:.4}"),
    )
}

fn criterion_9(first: &Path, second: &Path) -> Outcome {
    run_pipeline(second)?;
    let a = fs::read(first.join("eval/report.json")).map_err(|e| e.to_string())?;
    let b = fs::read(second.join("eval/report.json")).map_err(|e| e.to_string())?;
    check(
        a == b,
        format!(
            "repeated run report identical: {} ({} bytes)",
            a == b,
            a.len()
        ),
    )
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let run_a = scratch.path().join("run_a");
    let run_b = scratch.path().join("run_b");
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "gradient fidelity", criterion_1()),
        (2, "closed-form fixed points", criterion_2()),
        (3, "padding rule", criterion_3()),
        (4, "fusion solver", criterion_4()),
        (5, "vote/argmax oracles", criterion_5()),
        (6, "protocol exactness", criterion_6()),
        (7, "end-to-end desk scale", criterion_7(&run_a)),
        (
            8,
            "average-fusion baseline",
            criterion_8(&run_a, scratch.path()),
        ),
        (9, "determinism", criterion_9(&run_a, &run_b)),
    ];
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
