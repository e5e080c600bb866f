use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_markov-stable"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
seed = 11
replicates = 20
n_grid = [10, 100]
thetas = [-1.0, 1.0]

[chain]
kind = "ar1"
rho = 0.5

[observable]
kind = "quantile"
law = { law = "pareto", alpha = 0.8, c_plus = 0.5, c_minus = 0.5 }
"#;

#[test]
fn simulate_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let prefix = dir.path().join("out");
    let o = run(&["simulate", "-c", &cfg, "-o", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.json")).unwrap()).unwrap();
    assert_eq!(json["levels"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("out_cf.csv")).unwrap();
    assert!(csv.starts_with("n,theta,"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn stdout_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = run(&["--threads", "1", "simulate", "-c", &cfg]);
    let b = run(&["--threads", "2", "simulate", "-c", &cfg]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &format!("mystery = 1\n{SMALL}"));
    let o = run(&["simulate", "-c", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("configuration error"));
    let centering = write(dir.path(), "centering.toml", &format!("centering = \"conditional\"\n{SMALL}"));
    assert_eq!(run(&["simulate", "-c", &centering]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "-c", "/nonexistent/cfg.toml"]).status.code(), Some(2));
    assert_eq!(run(&["bn", "--alpha", "2.5"]).status.code(), Some(2));
}

#[test]
fn numeric_errors_exit_three() {
    let o = run(&["bn", "--alpha", "0.01", "--n", "1000000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric error"));
}

#[test]
fn bn_and_diagnose_succeed() {
    let o = run(&["bn", "--alpha", "1.5", "--n", "10,1000"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "diag.toml", "covariance_paths = 20\ncovariance_len = 2000\n");
    let o = run(&["diagnose", "--settings", &s]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["gap"]["bound"].as_f64().unwrap() > 0.4);
}
