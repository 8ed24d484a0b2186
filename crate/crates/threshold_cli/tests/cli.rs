use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_threshold-toolkit"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("spawn")
}

fn report(out: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(name)).unwrap()).unwrap()
}

#[test]
fn grushin_verify_prints_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["grushin-verify", "--seed", "7", "--trials", "50"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let line = stdout.lines().find(|l| l.starts_with("max identity residual")).unwrap();
    let v: f64 = line.split(':').nth(1).unwrap().trim().parse().unwrap();
    assert!(v < 1e-10, "{v}");
    assert_eq!(report(dir.path(), "grushin_verify.json")["suite"]["seed"], 7);
}

#[test]
fn empty_model_is_regular_with_zero_scattering_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["classify"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "classify.json");
    assert_eq!(r["case"], "Regular");
    assert_eq!(r["mu"], 0);
    let s = &r["scattering_length"][0][0];
    assert_eq!(s[0].as_f64().unwrap(), 0.0);
}

#[test]
fn free_critical_channel_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["critical"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "critical.json");
    assert_eq!(r["d_a"], 2);
    assert_eq!(r["s_a"].as_f64().unwrap(), 1.5);
    assert_eq!(r["hardy_ok"], true);
}

#[test]
fn unknown_operator_kind_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[operator]\nkind = \"bogus\"\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "classify"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[flow]\ntau_ends = 3.0\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "flow"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau_ends"));
}

#[test]
fn missing_config_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--config", "/nonexistent/scenario.toml", "classify"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scenario_command_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("flow.toml");
    let o = run(&["--config", cfg.to_str().unwrap(), "classify"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn violated_tolerance_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "[grushin]\ntrials = 3\nidentity_tol = 1e-30\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "grushin-verify"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().env("THRESHOLD_TOOLKIT_THREADS", "zero").arg("--out").arg(dir.path()).arg("flow").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_bit_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("classify_rank_one.toml");
    for d in [&a, &b] {
        let o = bin()
            .env("THRESHOLD_TOOLKIT_THREADS", if d.path() == a.path() { "1" } else { "4" })
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(d.path())
            .arg("classify")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    let ra = std::fs::read(a.path().join("classify.json")).unwrap();
    let rb = std::fs::read(b.path().join("classify.json")).unwrap();
    assert!(ra == rb);
}

#[test]
fn flow_csv_header_names_units() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("flow.toml");
    let o = run(&["--config", cfg.to_str().unwrap(), "flow"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("flow.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "tau [1],b [1],a [1],closed_form_b [1]");
    assert!(report(dir.path(), "flow.json")["max_a_drift"].as_f64().unwrap() <= 1e-8);
}

/// Every scenario in the regression set runs to completion with status 0.
#[test]
fn regression_scenarios_succeed() {
    let mut files: Vec<_> = std::fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    assert!(files.len() >= 10);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let table: toml::Table = text.parse().unwrap();
        let cmd = table["command"].as_str().unwrap().to_string();
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["--config", f.to_str().unwrap(), &cmd], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}: {}", f.display(), String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn resonance_scenario_reports_universal_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("scatter_resonance.toml");
    let o = run(&["--config", cfg.to_str().unwrap(), "scatter"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "scatter.json");
    assert_eq!(r["case"], "Exceptional1");
    let law = r["resonance_law_coefficient"].as_f64().unwrap();
    assert!((law - 4.0 * std::f64::consts::PI).abs() < 0.05 * 4.0 * std::f64::consts::PI, "{law}");
    assert_eq!(r["threshold_s_matrix"]["maximal"], true);
}
