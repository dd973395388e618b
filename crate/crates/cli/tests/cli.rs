use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pulse_core::{center, estimate, load_csv, sem, ColumnSchema, DesignView, EstimatorSpec, Intervention, ModelPartition, Roles, SemModel, SemSpec};

const E1_SEM: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/e1_sem.json");

fn pulse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulse")).args(args).env_remove("PULSE_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, sem_path: &str, n: usize, seed: u64, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = pulse(&["simulate", "--sem", sem_path, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

/// X1 = A1 + A2 + H + e, Y = X1 + H + 3 A2 + e: A2 violates the exclusion restriction.
const INVALID_INSTRUMENT_SEM: &str = r#"{
  "target": "Y", "endogenous": ["X1"], "hidden": ["H"], "anchors": ["A1", "A2"],
  "b": [[0, 0, 0], [1, 0, 0], [1, 1, 0]],
  "m": [[0, 1, 0], [3, 1, 0]],
  "noise_variances": [1, 1, 1],
  "anchor_cov": [[1, 0], [0, 1]]
}"#;

/// X1 = A1 + A2 + e, Y = X1 + e without confounding.
const UNCONFOUNDED_SEM: &str = r#"{
  "target": "Y", "endogenous": ["X1"], "anchors": ["A1", "A2"],
  "b": [[0, 0], [1, 0]],
  "m": [[0, 1], [0, 1]],
  "noise_variances": [1, 1],
  "anchor_cov": [[1, 0], [0, 1]]
}"#;

fn write_sem(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_shape_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), E1_SEM, 5, 1, "s.csv");
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "A,X,Y");
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["intervention"]["kind"], "none");
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), E1_SEM, 50, 9, "a.csv");
    let b = simulate(dir.path(), E1_SEM, 50, 9, "b.csv");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn hard_intervention_fixes_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let iv = dir.path().join("iv.json");
    fs::write(&iv, r#"{"kind": "hard", "value": [3.0]}"#).unwrap();
    let out = dir.path().join("i.csv");
    let o = pulse(&["simulate", "--sem", E1_SEM, "--n", "20", "--seed", "1", "--intervene", p(&iv), "--out", p(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("3,")));
    let manifest = fs::read_to_string(dir.path().join("i.manifest.json")).unwrap();
    assert!(manifest.contains("\"hard\""));
}

#[test]
fn simulate_then_estimate_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), E1_SEM, 300, 4, "r.csv");
    let spec: SemSpec = serde_json::from_str(&fs::read_to_string(E1_SEM).unwrap()).unwrap();
    let model = SemModel::from_spec(&spec).unwrap();
    let direct = center(&sem::sample(&model, 300, 4, &Intervention::None).unwrap(), Roles::ALL);
    let schema = ColumnSchema { target: "Y".into(), endogenous: vec!["X".into()], exogenous: vec!["A".into()] };
    let loaded = center(&load_csv(&out, &schema).unwrap(), Roles::ALL);
    let part = ModelPartition::all_endogenous(1);
    for spec in [EstimatorSpec::Ols, EstimatorSpec::Tsls, EstimatorSpec::Fuller(4.0)] {
        let a = estimate(&DesignView::new(&direct, &part).unwrap(), &spec).unwrap().alpha;
        let b = estimate(&DesignView::new(&loaded, &part).unwrap(), &spec).unwrap().alpha;
        assert_eq!(a[0].to_bits(), b[0].to_bits(), "{spec}");
    }
    let json = dir.path().join("e.json");
    let o = pulse(&["estimate", "--data", p(&out), "--target", "Y", "--endogenous", "X", "--instruments", "A", "--estimator", "ols", "--json", p(&json)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let ols = estimate(&DesignView::new(&loaded, &part).unwrap(), &EstimatorSpec::Ols).unwrap().alpha[0];
    let reported = doc["estimates"][0]["coefficients"]["X"].as_f64().unwrap();
    assert_eq!(reported, format!("{ols:.9e}").parse::<f64>().unwrap());
}

#[test]
fn ols_accepted_output_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let sem_path = write_sem(dir.path(), "u.json", UNCONFOUNDED_SEM);
    let data = simulate(dir.path(), &sem_path, 400, 3, "u.csv");
    let o = pulse(&["estimate", "--data", p(&data), "--target", "Y", "--endogenous", "X1", "--instruments", "A1,A2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/ols_accepted.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn tsls_rejected_message_and_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let sem_path = write_sem(dir.path(), "bad.json", INVALID_INSTRUMENT_SEM);
    let data = simulate(dir.path(), &sem_path, 1000, 5, "bad.csv");
    let base = ["estimate", "--data", p(&data), "--target", "Y", "--endogenous", "X1", "--instruments", "A1,A2", "--estimator", "pulse"];
    let o = pulse(&base);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "Warning: TSLS outside interior of acceptance region."), "{text}");
    assert!(text.contains("reporting fuller:4 instead"));

    let mut strict = base.to_vec();
    strict.extend(["--fallback", "none"]);
    let o = pulse(&strict);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn missing_column_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), E1_SEM, 20, 1, "d.csv");
    let o = pulse(&["estimate", "--data", p(&data), "--target", "Y", "--endogenous", "Z9", "--instruments", "A"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("Z9"));
}

#[test]
fn singular_instruments_are_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut text = String::from("y,x,a,b\n");
    for i in 0..30 {
        let a = (i % 7) as f64;
        text.push_str(&format!("{},{},{},{}\n", 2.0 * a + (i % 3) as f64, a + (i % 5) as f64, a, 2.0 * a));
    }
    fs::write(&path, text).unwrap();
    let o = pulse(&["estimate", "--data", p(&path), "--target", "y", "--endogenous", "x", "--instruments", "a,b"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let o = pulse(&["estimate", "--target", "y"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = pulse(&["experiment", "--design", "nope", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for name in ["robustness-e1", "univariate", "mv-random", "mv-fixed", "underid-e3"] {
        assert!(err.contains(name), "{err}");
    }
    let data = simulate(dir.path(), E1_SEM, 20, 1, "d.csv");
    let o = pulse(&["estimate", "--data", p(&data), "--target", "Y", "--endogenous", "X", "--instruments", "A", "--estimator", "median"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_sem_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_sem(dir.path(), "bad.json", r#"{"target": 1}"#);
    let o = pulse(&["simulate", "--sem", &bad, "--n", "3", "--out", p(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_stationary_sem_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cyclic = r#"{
      "target": "Y", "endogenous": ["X1"], "anchors": ["A1"],
      "b": [[0, 2], [2, 0]], "m": [[0, 1]], "noise_variances": [1, 1], "anchor_cov": [[1]]
    }"#;
    let path = write_sem(dir.path(), "c.json", cyclic);
    let o = pulse(&["simulate", "--sem", &path, "--n", "3", "--out", p(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn robustness_experiment_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = pulse(&["experiment", "--design", "robustness-e1", "--reps", "3", "--seed", "7", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curves = fs::read_to_string(dir.path().join("robustness-e1_curves.csv")).unwrap();
    let header = curves.lines().next().unwrap();
    for col in ["kappa", "estimate", "wcmspe"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    assert!(stdout(&o).contains("reported [1.37, 3.00]"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("robustness-e1.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["version"], pulse_core::VERSION);
    assert_eq!(manifest["columns"][0], "cell");
}

#[test]
fn experiment_config_file_and_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"design": {"name": "univariate", "q": [2], "rho": [0.5], "r2": [0.1], "n": [50]}, "reps": 20, "master_seed": 1}"#,
    )
    .unwrap();
    let run = |threads: &str, out: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_pulse"))
            .args(["experiment", "--config", p(&cfg), "--out", p(out)])
            .env("PULSE_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("univariate.csv")).unwrap()
    };
    let one = run("1", &dir.path().join("one"));
    let two = run("2", &dir.path().join("two"));
    assert_eq!(one, two);
    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().next().unwrap(), "cell,q,rho,r2,n,estimator,metric,value,repetitions_used");
}

#[test]
fn diagnose_reports_identification() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), E1_SEM, 100, 2, "d.csv");
    let o = pulse(&["diagnose", "--data", p(&data), "--target", "Y", "--endogenous", "X", "--instruments", "A"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("just-identified"));
    assert!(text.contains("G_n"));
}
