use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn stackopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = stackopt(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A smooth regression task with a deterministic pseudo-random design.
fn write_dataset(dir: &Path, task: &str) -> (PathBuf, PathBuf) {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = || {
        state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
    };
    let mut csv = String::from("a,b,c,target\n");
    for _ in 0..150 {
        let (a, b, c) = (next(), next(), next());
        let y = a + b.sin() + 0.1 * c;
        csv.push_str(&format!("{a},{b},{c},{y}\n"));
    }
    let data = dir.join("data.csv");
    let schema = dir.join("schema.json");
    fs::write(&data, csv).unwrap();
    fs::write(&schema, format!(r#"{{"label": "target", "task": "{task}"}}"#)).unwrap();
    (data, schema)
}

fn build_pool(dir: &Path) -> PathBuf {
    let (data, schema) = write_dataset(dir, "regression");
    let pool = dir.join("pool");
    let out = ok(&[
        "pool", "build", "--data", data.to_str().unwrap(), "--schema", schema.to_str().unwrap(),
        "--size", "8", "--seed", "3", "--out", pool.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("val_loss"));
    assert!(pool.join("pool.json").exists());
    pool
}

#[test]
fn optimize_writes_result_history_and_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let pool = build_pool(dir.path());
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    ok(&[
        "optimize", "--pool", pool.to_str().unwrap(), "--budget", "2", "--seed", "1",
        "--cache", &p("cache"), "--out", &p("result.json"), "--history", &p("history.jsonl"),
        "--stack-out", &p("stack"), "--dump-g-tilde", &p("g.csv"),
    ]);
    let result = json(&dir.path().join("result.json"));
    assert_eq!(result["history"].as_array().unwrap().len(), 2);
    assert!(result["test_loss"].as_f64().unwrap().is_finite());
    let best = result["best_val_loss"].as_f64().unwrap();
    let first = result["history"][0]["val_loss"].as_f64().unwrap();
    assert!(best <= first);
    assert_eq!(fs::read_to_string(dir.path().join("history.jsonl")).unwrap().lines().count(), 2);
    let g = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(g.lines().count(), 8);
    assert!(g.lines().all(|l| l.split(',').count() == 8));
    assert!(dir.path().join("stack").join("stack.json").exists());
}

#[test]
fn baselines_report_test_losses() {
    let dir = tempfile::tempdir().unwrap();
    let pool = build_pool(dir.path());
    for strategy in ["single-best", "es25", "all-linear-l1", "best-es-l2"] {
        let out = dir.path().join(format!("{strategy}.json"));
        ok(&["baseline", "--pool", pool.to_str().unwrap(), "--strategy", strategy, "--out", out.to_str().unwrap()]);
        let v = json(&out);
        assert_eq!(v["strategy"]["name"], strategy);
        assert!(v["test_loss"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn exit_codes_distinguish_validation_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let pool = build_pool(dir.path());
    let out = dir.path().join("r.json");
    let budget = stackopt(&["optimize", "--pool", pool.to_str().unwrap(), "--budget", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(budget.status.code(), Some(3));

    let unknown = stackopt(&["baseline", "--pool", pool.to_str().unwrap(), "--strategy", "all-gbt-l9", "--out", out.to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(2));

    let (data, schema) = write_dataset(dir.path(), "clustering");
    let bad = stackopt(&[
        "pool", "build", "--data", data.to_str().unwrap(), "--schema", schema.to_str().unwrap(),
        "--out", dir.path().join("p2").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("clustering"));

    let few = stackopt(&["experiment", "theorem1", "--samplings", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(few.status.code(), Some(2));
}

#[test]
fn theorem1_experiment_emits_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let run = ok(&["experiment", "theorem1", "--samplings", "300", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&run.stdout).contains("proportion"));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    assert_eq!(v["rows"][0]["gamma0"].as_f64(), Some(0.0));
}

#[test]
fn pool_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let pool = build_pool(dir.path());
    let out = dir.path().join("w.json");
    ok(&[
        "experiment", "dropout-weights", "--pool", pool.to_str().unwrap(), "--grid", "0,0.4", "--seeds", "2",
        "--out", out.to_str().unwrap(),
    ]);
    let rows = json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(rows[0]["max_weight_proportion"].as_f64().unwrap() <= 1.0);

    ok(&[
        "experiment", "layer-improvement", "--pool", pool.to_str().unwrap(), "--max-layers", "2",
        "--out", out.to_str().unwrap(),
    ]);
    let rows = json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert_eq!(rows[0]["test_improvement"].as_f64(), Some(0.0));
}

#[test]
fn bench_runs_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _) = write_dataset(dir.path(), "regression");
    let manifest = dir.path().join("suite.json");
    fs::write(
        &manifest,
        r#"{"pool_size": 6, "seed": 2, "datasets": [
            {"name": "csv", "source": "csv", "data": "data.csv", "schema": "schema.json", "seed": 1},
            {"name": "synthetic", "source": "regression", "n": 120, "d": 3, "noise": 0.2, "seed": 5}
        ]}"#,
    )
    .unwrap();
    let out = dir.path().join("report.json");
    let run = ok(&[
        "bench", "--datasets", manifest.to_str().unwrap(), "--methods", "single-best,es25,pseo-2",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&run.stdout).contains("pseo-2"));
    let v = json(&out);
    assert_eq!(v["methods"].as_array().unwrap().len(), 3);
    for d in v["datasets"].as_array().unwrap() {
        let sum: f64 = d["ranks"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).sum();
        assert!((sum - 6.0).abs() < 1e-9);
    }
}
