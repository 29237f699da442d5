mod common;

use std::process::Command;

use common::benchmarks_dir;

fn maids(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_maids")).args(args).output().unwrap()
}

#[test]
fn bounds_prints_value() {
    let out = maids(&["bounds", "--thm", "1", "--dims", "2,2,2,3,100"]);
    assert!(out.status.success());
    let v: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((v - 2.06e4).abs() < 100.0);
}

#[test]
fn bounds_rejects_unknown_theorem() {
    let out = maids(&["bounds", "--thm", "9", "--dims", "2,2,2,3,100"]);
    assert_eq!(out.status.code(), Some(1));
    let out = maids(&["bounds", "--thm", "3", "--dims", "2,2,2,3,100"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = benchmarks_dir().join("general_sum_cce.json");
    let out = maids(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("regret.csv")).unwrap();
    assert!(csv.starts_with("episode,seed,algorithm,inst_regret,cum_regret,duality_gap,mi_episode,mi_cum,bound_value"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["log_base"], "natural");
}

#[test]
fn run_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"name\": 3}").unwrap();
    assert_eq!(maids(&["run", path.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(maids(&["run", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn validate_accepts_envs() {
    let env = benchmarks_dir().join("envs").join("reveal_0.json");
    let out = maids(&["validate", env.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("zero-sum H=2"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[1, 2]").unwrap();
    assert_eq!(maids(&["validate", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn audit_is_clean_on_shipped_finite_prior() {
    let cfg = benchmarks_dir().join("zero_sum_random.json");
    let out = maids(&["audit", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("violations 0"));
}
