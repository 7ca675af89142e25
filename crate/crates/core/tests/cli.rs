use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maxconc::config::{load_config, save_config, Command as Cmd, ExperimentConfig};
use maxconc::covariance::ModelSpec;
use maxconc::montecarlo::DeltaSchedule;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_maxconc"));
    c.env_remove("MAXCONC_OUT_DIR");
    c
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn header(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    format!("{}\n", text.lines().next().unwrap())
}

/// Rows of a CSV as `column -> value` lookups.
fn rows(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| cols.iter().map(|c| c.to_string()).zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &std::collections::HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap()
}

#[test]
fn csv_schemas_match_golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &[&str]); 7] = [
        ("constants", &["constants", "--p", "100"], &["constants.csv"]),
        ("packing", &["packing", "--model", "powerlaw", "--gamma", "1", "--tau", "0.3", "--p", "500"], &["packing.csv"]),
        (
            "rate-bound",
            &["rate-bound", "--model", "powerlaw", "--gamma", "1", "--p", "1e6", "--transforms", "exp,square"],
            &["rate_bound.csv"],
        ),
        ("concentration", &["concentration", "--p", "256", "--reps", "100"], &["concentration.csv"]),
        (
            "phase-diagram",
            &["phase-diagram", "--p", "1024", "--beta", "0.5", "--r", "1,2", "--reps", "50"],
            &["phase_diagram.csv", "boundary.csv"],
        ),
        ("gumbel-check", &["gumbel-check", "--p", "64", "--reps", "1000"], &["gumbel_check.csv"]),
        ("conjecture-probe", &["conjecture-probe", "--p", "256", "--reps", "100"], &["conjecture_probe.csv"]),
    ];
    for (name, args, files) in cases {
        let out = dir.path().join(name);
        let o = run_in(&out, args);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert_eq!(header(&out.join(f)), golden(f), "{name}: {f}");
            assert!(out.join(f.replace(".csv", ".json")).exists());
        }
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn constants_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["constants", "--p", "100"]);
    assert!(o.status.success());
    let r = &rows(&dir.path().join("constants.csv"))[0];
    assert!((num(r, "u_p") - 2.3263).abs() < 1e-4);
    assert!((num(r, "u_star") - 2.3663).abs() < 1e-4);
    // The CSV also goes to stdout.
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("p,u_p"));
}

#[test]
fn packing_example() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["packing", "--model", "iid", "--tau", "0.5", "--p", "1000"]).status.success());
    let r = &rows(&dir.path().join("packing.csv"))[0];
    assert_eq!(r["n_tau"], "1");
    assert_eq!(num(r, "alpha"), 0.0);
    assert_eq!(r["gamma_size"], "1000");
}

#[test]
fn rate_bound_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["rate-bound", "--model", "powerlaw", "--gamma", "1", "--p", "1048576,2^30,2^40,2^60"]);
    assert!(o.status.success());
    let rs = rows(&dir.path().join("rate_bound.csv"));
    let r = &rs[0];
    let lp = 1_048_576f64.ln();
    assert!((num(r, "tau_p") - 1.0 / lp).abs() < 1e-15);
    // total · log p / log log p stays in a fixed band as p grows.
    for r in &rs {
        let lp = num(r, "p").ln();
        let scaled = num(r, "total") * lp / lp.ln();
        assert!((1.0..3.0).contains(&scaled), "{scaled}");
    }
}

#[test]
fn json_mirrors_csv_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["constants", "--p", "10,100,1e8"]).status.success());
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    let csv = rows(&dir.path().join("constants.csv"));
    for (k, r) in csv.iter().enumerate() {
        assert_eq!(j["rows"][k][1].as_f64().unwrap(), num(r, "u_p"));
        assert_eq!(j["rows"][k][1].as_f64().unwrap(), maxconc::normal::u_p(num(r, "p") as u64).unwrap());
    }
}

#[test]
fn usage_errors_exit_2() {
    let o = bin().arg("--no-such-flag").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = bin().args(["packing", "--p", "10"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["concentration", "--p", "100", "--transform", "exp", "--norm", "u_p"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "command = \"constants\"\np_grid = [100]\nseed = \"x\"\n").unwrap();
    let o = bin().arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    std::fs::write(&path, "command = \"packing\"\np_grid = [100]\n").unwrap();
    let o = bin().arg("--config").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));
}

#[test]
fn indefinite_explicit_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "1,0.9,-0.9\n0.9,1,0.9\n-0.9,0.9,1\n").unwrap();
    let o = run_in(dir.path(), &["packing", "--model", "explicit", "--matrix", m.to_str().unwrap(), "--p", "3", "--tau", "0.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eigenvalue"));
}

#[test]
fn explicit_model_runs() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "1,0.6,0.1\n0.6,1,0.2\n0.1,0.2,1\n").unwrap();
    let o = run_in(dir.path(), &["packing", "--model", "explicit", "--matrix", m.to_str().unwrap(), "--p", "3", "--tau", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&dir.path().join("packing.csv"))[0]["n_tau"], "2");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = bin().env("MAXCONC_OUT_DIR", &target).args(["constants", "--p", "10"]).output().unwrap();
    assert!(o.status.success());
    assert!(target.join("constants.csv").exists());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Cmd::Concentration, vec![1024, 4096]);
    cfg.model = ModelSpec::log_decay(1.0);
    cfg.delta_schedule = Some(DeltaSchedule::LoglogOverLog { c: 2.0 });
    cfg.reps = Some(200);
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    save_config(&cfg, &a).unwrap();
    let loaded = load_config(&a).unwrap();
    assert_eq!(loaded, cfg);
    save_config(&loaded, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn manifest_replay_reproduces_csv() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = run_in(
        &first,
        &["concentration", "--model", "powerlaw", "--gamma", "1.5", "--permutation", "shuffle:4", "--p", "512,2048", "--reps", "200", "--seed", "77"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["seed"], 77);
    assert_eq!(manifest["config"]["p_grid"], serde_json::json!([512, 2048]));
    assert!(manifest["wall_time_seconds"].as_f64().is_some());
    assert!(manifest["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().starts_with("sampler:")));
    let second = dir.path().join("second");
    let o = bin().arg("--config").arg(first.join("manifest.json")).arg("--out").arg(&second).arg("--threads").arg("3").output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(first.join("concentration.csv")).unwrap(), std::fs::read(second.join("concentration.csv")).unwrap());
}

#[test]
fn svg_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["phase-diagram", "--p", "1024", "--beta", "0.3,0.6", "--r", "0.5,1,1.5", "--r-relative", "--reps", "50", "--svg"]);
    assert!(o.status.success());
    let svg = std::fs::read_to_string(dir.path().join("phase_diagram_p1024.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    let o = run_in(dir.path(), &["concentration", "--p", "256,1024", "--reps", "100", "--svg"]);
    assert!(o.status.success());
    assert!(dir.path().join("concentration.svg").exists());
    let o = run_in(&dir.path().join("plain"), &["concentration", "--p", "256", "--reps", "100"]);
    assert!(o.status.success());
    assert!(!dir.path().join("plain/concentration.svg").exists());
}
