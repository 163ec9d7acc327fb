use plbarrier::cli::{run_certify, run_lambda, run_report, run_transform, ScenarioConfig};
use plbarrier::operators::OperatorSpec;
use plbarrier::Error;
use std::fs;
use std::path::Path;
use std::process::Command;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_plbarrier"));
    c.env_remove("PLBARRIER_OUT");
    c
}

fn quick(dir: &Path) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.run.n_samples = 4_000;
    cfg.run.condition_trials = 500;
    cfg.out_override = Some(dir.to_path_buf());
    cfg
}

fn write_scenario(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn default_scenario_certifies_every_case() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .args(["certify", "--samples", "5000", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["certificates.csv", "barriers.csv", "summary.csv", "summary.md"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 5);
}

#[test]
fn critical_sigma_dispatches_the_critical_case() {
    let dir = TempDir::new().unwrap();
    let mut cfg = quick(dir.path());
    let gamma = OperatorSpec::grad_trace_minus_infinity(2, 0.0).unwrap().gamma();
    cfg.problem.sigmas = vec![gamma / 2.0];
    let out = run_certify(&cfg).unwrap();
    assert_eq!(out.results.len(), 1);
    assert_eq!(out.results[0].case_id.as_str(), "I.iii");
    assert!(out.all_passed());
}

#[test]
fn malformed_z_domain_names_the_field() {
    let text = r#"
[operator]
kind = "grad_trace_minus_infinity"
n = 2

[problem]
sigma = 1.0
T = 1.0
alpha = 1.0

[problem.z]
kind = "table"
knots = [1.0, 2.0]
values = [1.0, 0.5]
domain = { lower = 0.5 }
"#;
    let cfg = ScenarioConfig::from_toml_str(text).unwrap();
    match cfg.z() {
        Err(Error::Config { field, .. }) => assert!(field.starts_with("problem.z.domain"), "{field}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "[operator]\nkind = \"grad_trace_minus_infinity\"\nn = 2\nsize = 3\n[problem]\nT = 1.0\nalpha = 1.0\n";
    assert!(matches!(ScenarioConfig::from_toml_str(text), Err(Error::Config { .. })));
}

#[test]
fn empty_directory_reports_nothing() {
    let dir = TempDir::new().unwrap();
    let report = run_report(dir.path()).unwrap();
    assert!(report.sections.is_empty());
    assert!(report.missing.is_empty());
    let status = bin().args(["report", "--out-dir"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let cfg = quick(dir.path());
        run_certify(&cfg).unwrap();
        run_lambda(&cfg).unwrap();
    }
    for name in ["certificates.csv", "barriers.csv", "summary.csv", "lambda.csv", "conditions.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn failing_certificate_exits_with_one() {
    let dir = TempDir::new().unwrap();
    // a k = 1 construction asked of a k > 1 operator
    let status = bin()
        .args(["certify", "--cases", "II.a", "--samples", "2000", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn mismatched_simulation_case_is_an_error() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .args(["simulate", "--case", "II.iv", "--R", "5", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_ne!(status.code(), Some(0));
}

#[test]
fn unknown_case_token_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .args(["certify", "--cases", "IX", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn transform_writes_both_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = quick(dir.path());
    let out = run_transform(&cfg, false).unwrap();
    assert_eq!(out.classification.to_string(), "convergent");
    let text = fs::read_to_string(dir.path().join("transform.csv")).unwrap();
    assert!(text.starts_with("v,u,Z"));
    assert_eq!(text.lines().count(), 1 + 101);
    assert!(dir.path().join("classification.csv").is_file());

    let status = bin()
        .args(["transform", "--f", "expr:s^2", "--k", "3", "--classify-only", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let class = fs::read_to_string(dir.path().join("classification.csv")).unwrap();
    assert!(class.trim_end().ends_with("divergent"), "{class}");
}

#[test]
fn simulation_and_lambda_feed_the_report() {
    let dir = TempDir::new().unwrap();
    let config = write_scenario(
        dir.path(),
        r#"
seed = 7

[operator]
kind = "grad_trace_minus_infinity"
n = 2

[problem]
sigma = 1.0
T = 1.0
alpha = 1.0

[run]
n_samples = 3000
condition_trials = 300
lambda_steps = 21

[sim]
R = [4.0, 8.0]
h = 0.5
"#,
    );
    for sub in ["certify", "simulate", "lambda", "report"] {
        let status = bin()
            .arg(sub)
            .arg("--config")
            .arg(&config)
            .arg("--out-dir")
            .arg(dir.path())
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "{sub}");
    }
    let lambda = fs::read_to_string(dir.path().join("lambda.csv")).unwrap();
    assert!(lambda.starts_with("lambda,lambda_min,lambda_max"));
    assert_eq!(lambda.lines().count(), 1 + 21);
    assert!(dir.path().join("pl_summary.csv").is_file());
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.lines().count() >= 4, "{report}");
}
