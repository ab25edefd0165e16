use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orlicz-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing numeric `{key}` in {v}"))
}

#[test]
fn gibbs_gaussian_case() {
    let v = json(&run(&["gibbs", "--V", "power:2", "--R", "1"]));
    assert!((num(&v, "alpha") + 0.5).abs() < 1e-9);
    assert!((num(&v, "m_V") - 1.0).abs() < 1e-9);
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((num(&v, "log_partition") - half_log_2pi).abs() < 1e-9);
}

#[test]
fn gibbs_half_radius() {
    let v = json(&run(&["gibbs", "--V", "power:2", "--R", "0.5"]));
    assert!((num(&v, "alpha") + 1.0).abs() < 1e-9);
    assert!((num(&v, "log_partition") - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-9);
    assert!((num(&v, "m_V") - 0.5).abs() < 1e-9);
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn gibbs_accepts_negative_alpha() {
    let v = json(&run(&["gibbs", "--V", "power:1", "--alpha", "-2"]));
    // Laplace law with rate 2: E|X| = 1/2.
    assert!((num(&v, "m_V") - 0.5).abs() < 1e-9);
}

#[test]
fn thresholds_gaussian_laplace_pair() {
    let v = json(&run(&["thresholds", "--V1", "power:2", "--V2", "power:1"]));
    assert!((num(&v, "r_bar") - 0.5f64.sqrt()).abs() < 1e-8);
    assert!((num(&v, "r_typical") - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-8);
}

#[test]
fn maxent_subcritical_case_is_laplace() {
    let v = json(&run(&["maxent", "--V1", "power:2", "--V2", "power:1", "--c2", "0.5"]));
    assert_eq!(v["regime"], "subcritical");
    assert!(num(&v, "mu1_star").abs() < 1e-8);
    assert!((num(&v, "mu2_star") - 2.0).abs() < 1e-6);
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(run(&["gibbs", "--V", "cubic", "--R", "1"]).status.code(), Some(2));
    assert_eq!(run(&["gibbs", "--V", "power:2", "--R", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["gibbs", "--V", "power:2"]).status.code(), Some(2));
    assert_eq!(run(&["--quad-tol", "-1", "verify"]).status.code(), Some(2));
    assert_eq!(run(&["experiment"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    // The linear potential does not dominate the quadratic one.
    assert_eq!(run(&["thresholds", "--V1", "power:1", "--V2", "power:2"]).status.code(), Some(3));
    // Jensen: E|X| <= sqrt(E X^2), so these equalities cannot hold together.
    let out = run(&[
        "maxent", "--V1", "power:2", "--V2", "power:1", "--c2", "1.5", "--kind1", "eq", "--kind2", "eq",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gibbs.json");
    let dumped = run(&["gibbs", "--V", "power:4", "--R", "0.3", "--seed", "11", "--dump-config"]);
    std::fs::write(&path, &dumped.stdout).unwrap();
    let cfg = path.to_str().unwrap();
    let again = run(&["--config", cfg, "gibbs", "--dump-config"]);
    assert_eq!(dumped.stdout, again.stdout);
    let direct = json(&run(&["gibbs", "--V", "power:4", "--R", "0.3", "--seed", "11"]));
    let via_file = json(&run(&["--config", cfg, "gibbs"]));
    assert_eq!(direct, via_file);
}

#[test]
fn config_for_another_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gibbs.json");
    std::fs::write(&path, run(&["gibbs", "--V", "power:2", "--R", "1", "--dump-config"]).stdout).unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "thresholds"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thinshell_reports_infinite_values() {
    let v = json(&run(&["thinshell", "--V", "power:4", "--p", "2", "--x=-0.5,1.2"]));
    let rows = v["values"].as_array().unwrap();
    assert_eq!(rows[0]["rate"], "inf");
    assert_eq!(rows[0]["infeasible"], false);
    assert_eq!(rows[1]["rate"], "inf");
    assert_eq!(rows[1]["infeasible"], true);
}

#[test]
fn samples_are_reproducible_and_independent_of_workers() {
    let args = ["sample", "--mode", "ball", "--V1", "power:2", "--n", "6", "--count", "40", "--seed", "5"];
    let one = run(&[&["--workers", "1"], &args[..]].concat());
    let four = run(&[&["--workers", "4"], &args[..]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    let mut lines = text.lines();
    let meta: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(lines.next().unwrap(), "x1,x2,x3,x4,x5,x6");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 40);
    for r in &rows {
        assert!(r.iter().map(|x| x * x).sum::<f64>() <= 6.0);
    }
}

#[test]
fn experiment_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("volume.json");
    let out = run(&["experiment", "--kind", "volume", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["experiment"], "volume");
    let csv = std::fs::read_to_string(path.with_extension("csv")).unwrap();
    assert!(csv.starts_with("case,n,eps,statistic,target,tolerance,pass"));
}

#[test]
fn conditional_config_file_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("conditional_sub.json");
    let report = dir.path().join("conditional_sub_report.json");
    let text = serde_json::json!({
        "experiment": "conditional",
        "potentials": ["power:2", "power:1"],
        "R": 0.5,
        "n": [60],
        "samples": 3000,
        "seed": 0,
        "output": report,
    });
    std::fs::write(&cfg, text.to_string()).unwrap();
    let out = run(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"seed\":42"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 42);
    assert_eq!(v["pass"], true);
}

#[test]
fn failing_experiment_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let dumped = run(&["experiment", "--kind", "volume", "--dump-config"]);
    let mut v: Value = serde_json::from_slice(&dumped.stdout).unwrap();
    // At n = 10 the finite-dimensional gap is far above this tolerance.
    v["n"] = serde_json::json!([10]);
    v["tolerance"] = serde_json::json!(1e-6);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "experiment", "--out", dir.path().join("r.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes() {
    let out = run(&["verify"]);
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 8);
}
