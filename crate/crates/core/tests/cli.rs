use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agebranch::config::RunConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agebranch")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_owned()
}

#[test]
fn missing_config_is_an_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["validate", "--config", "does_not_exist.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
    assert!(!out.exists());
}

#[test]
fn invalid_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config("pure_death.json")).unwrap()).unwrap();
    cfg["t_end"] = serde_json::json!("soon");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_end"));
    assert!(!out.exists());
}

#[test]
fn solve_u_pure_death_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve-u", "--config", &config("pure_death.json"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let v: f64 = table
        .lines()
        .find_map(|l| l.strip_prefix("1,0,"))
        .expect("row t = 1, x = 0")
        .parse()
        .unwrap();
    // survival to time 1 has probability e^-1, so u = −log(1 − (1 − e^-2) e^-1)
    let exact = -(1.0 - (1.0 - (-2.0f64).exp()) * (-1.0f64).exp()).ln();
    assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
}

#[test]
fn identity_check_passes_in_ci_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["identity-check", "--ci", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = std::fs::read_to_string(dir.path().join("identity.csv")).unwrap();
    assert_eq!(rows.lines().count(), 28);
}

#[test]
fn divergent_tail_is_not_ergodic() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ergodic", "--config", &config("log_squared_tail.json"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ergodic.json")).unwrap()).unwrap();
    assert_eq!(json["check"]["verdict"], "not_ergodic");
    assert!(json["study"].is_null());
}

#[test]
fn validate_ci_on_critical_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "validate",
        "--config",
        &config("bench_critical.json"),
        "--ci",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("reports.csv")).unwrap();
    assert!(csv.starts_with("name,mc,se,analytic,tol,z,verdict\n"));
    assert!(csv.lines().any(|l| l.starts_with("control:") && l.ends_with(",fail")));
}

#[test]
fn shipped_configs_round_trip() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg, "{}", path.display());
    }
}
