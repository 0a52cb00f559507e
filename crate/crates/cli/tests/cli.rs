use std::process::{Command, Output};

use serde_json::Value;

fn lpnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpnorm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn stability_reports_the_classical_critical_mass() {
    let o = lpnorm(&["stability", "--mu", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["mu_crit"].as_f64().unwrap() - 0.0385208965045513718).abs() <= 1e-17);
    assert_eq!(v["stable"], true);
    assert!(stdout(&o).contains("\"mu_crit\": 3.8520896504551372e-2"));
}

#[test]
fn sweep_rows_and_oblateness_shift() {
    let o = lpnorm(&["sweep", "--mu-grid", "0.001:0.05:50", "--A2", "0.001"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "mu_crit_shift").unwrap();
    for l in &lines[1..] {
        let shift: f64 = l.split(',').nth(col).unwrap().parse().unwrap();
        assert!((shift - 2.1038871010983331e-3).abs() < 1e-15);
    }
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let run = |n: &str| {
        Command::new(env!("CARGO_BIN_EXE_lpnorm"))
            .args(["sweep", "--mu-grid", "0.01:0.04:7", "--epsilon-grid", "0:0.01:3", "--W1", "1e-3"])
            .env("LPNORM_THREADS", n)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 22);
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(lpnorm(&["stability", "--mu", "0.9"]).status.code(), Some(2));
    assert_eq!(lpnorm(&["stability"]).status.code(), Some(2));
    assert_eq!(lpnorm(&["sweep", "--mu-grid", "0.1:0.2:0"]).status.code(), Some(2));
    assert_eq!(lpnorm(&["stability", "--mu", "abc"]).status.code(), Some(2));
    assert_eq!(lpnorm(&["stability", "--mu", "0.01", "--format", "csv"]).status.code(), Some(2));
    let bad = Command::new(env!("CARGO_BIN_EXE_lpnorm"))
        .args(["stability", "--mu", "0.01"])
        .env("LPNORM_THREADS", "0")
        .output()
        .unwrap();
    // only sweep consults the pool size
    assert_eq!(bad.status.code(), Some(0));
}

#[test]
fn config_file_with_flags_taking_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"subcommand": "stability", "mu": 0.02, "A2": 0.001}"#).unwrap();
    let c = cfg.to_str().unwrap();

    let from_file: Value = serde_json::from_str(&stdout(&lpnorm(&["--config", c]))).unwrap();
    assert_eq!(from_file["params"]["mu"].as_f64().unwrap(), 0.02);
    assert_eq!(from_file["params"]["A2"].as_f64().unwrap(), 0.001);

    let o = lpnorm(&["stability", "--config", c, "--mu", "0.01"]);
    let flagged: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(flagged["params"]["mu"].as_f64().unwrap(), 0.01);
    assert_eq!(flagged["params"]["A2"].as_f64().unwrap(), 0.001);

    assert_eq!(lpnorm(&["expand", "--config", c]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"mass": 1}"#).unwrap();
    assert_eq!(lpnorm(&["stability", "--config", c]).status.code(), Some(2));
}

#[test]
fn simulate_writes_csv_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("orbit.csv");
    let o = lpnorm(&["simulate", "--mu", "0.01", "--t-end", "200", "--dt-out", "0.1", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,x,y,vx,vy\n"));
    assert_eq!(csv.lines().count(), 2002);
    let spec: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("orbit.csv.spectrum.json")).unwrap()).unwrap();
    let w1 = spec["omega1"].as_f64().unwrap();
    let peaks: Vec<f64> = spec["peaks"].as_array().unwrap().iter().map(|p| p["frequency"].as_f64().unwrap()).collect();
    assert!(peaks.iter().any(|p| (p - w1).abs() < 5e-3), "{peaks:?}");
}

#[test]
fn birkhoff_dumps_parseable_series() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("series");
    let o = lpnorm(&["birkhoff", "--mu", "0.01", "--route", "both", "--dump-series", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["r"].as_array().unwrap().len(), 10);
    assert!(!v["discrepancies"].as_array().unwrap().is_empty());
    for name in ["B1_10", "B2_10_closed", "B2_01_generic", "Phi2"] {
        let text = std::fs::read_to_string(d.join(format!("{name}.txt"))).unwrap();
        let s = lpnorm::poisson_series::DAlembertSeries::parse(&text).unwrap();
        assert!(!s.is_empty(), "{name}");
    }
}

#[test]
fn verify_is_deterministic_and_exit_code_follows_results() {
    let a = lpnorm(&["verify", "--suite", "classical"]);
    let b = lpnorm(&["verify", "--suite", "classical"]);
    assert_eq!(a.stdout, b.stdout);
    let table = stdout(&a);
    let lines = table.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count();
    assert_eq!(lines, 7);
    let expected = if table.contains("[FAIL]") { 1 } else { 0 };
    assert_eq!(a.status.code(), Some(expected));

    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    lpnorm(&["verify", "--suite", "classical", "-o", p1.to_str().unwrap()]);
    lpnorm(&["verify", "--suite", "classical", "-o", p2.to_str().unwrap()]);
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn equilibria_and_normal_form_emit_json() {
    let o = lpnorm(&["equilibria", "--mu", "0.01", "--q1", "0.98", "--A2", "0.001", "--cd", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.last().unwrap()["method"], "refined");
    assert!(pts.last().unwrap()["residual_Ux"].as_f64().unwrap().abs() < 1e-12);

    let o = lpnorm(&["normal-form", "--mu", "0.01"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["normal_form_residual"].as_f64().unwrap() < 1e-10);

    // beyond the critical mass there are no frequencies
    assert_eq!(lpnorm(&["normal-form", "--mu", "0.2"]).status.code(), Some(1));
}
