use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semqam::verify::{theorem_checks, theorem_summary, CheckStatus};
use semqam_core::source::SourceStatistics;
use semqam_core::theory::DescentConfig;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn semqam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semqam"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn unknown_config_field_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"orderz": [16]}"#).unwrap();
    let out = semqam(&["--config", config.to_str().unwrap(), "stats"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn invalid_order_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"orders": [8]}"#).unwrap();
    let out = semqam(&[
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "sweep",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_report_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = semqam(&["--out", dir.path().to_str().unwrap(), "plot"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_writes_idx_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = semqam(&[
        "--config",
        fixture("small.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "ingest",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "train-images.idx",
        "train-labels.idx",
        "test-images.idx",
        "test-labels.idx",
        "train.csv",
        "test.csv",
    ] {
        assert!(dir.path().join("data").join(name).is_file(), "{name}");
    }
    let labels = std::fs::read(dir.path().join("data/test-labels.idx")).unwrap();
    assert_eq!(&labels[..4], &[0, 0, 8, 1]);
}

#[test]
fn plot_renders_an_existing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = semqam(&[
        "--out",
        dir.path().to_str().unwrap(),
        "plot",
        "--report",
        fixture("report.json").to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("q_sem_vs_snr.svg").is_file());
    assert!(dir.path().join("curves.csv").is_file());
}

#[test]
fn verify_theory_reports_every_order_and_reuses_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("small.json");
    let args = [
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "verify-theory",
    ];
    let first = semqam(&args);
    assert!(matches!(first.status.code(), Some(0 | 1)));
    let text = String::from_utf8_lossy(&first.stdout);
    for order in [4, 16] {
        assert!(text.contains(&format!("desk M={order}")));
    }
    assert!(dir.path().join("theory.json").is_file());
    assert!(dir.path().join("artifacts/constellation_16.json").is_file());
    let second = semqam(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn uniform_importance_is_reported_as_unmet_precondition() {
    let m = 4;
    let p: Vec<f64> = (0..m * m)
        .map(|k| if k / m == k % m { 0.0 } else { 1.0 / 12.0 })
        .collect();
    let stats = SourceStatistics::from_parts(vec![0.5; m], p).unwrap();
    let descent = DescentConfig {
        steps: 50,
        ..DescentConfig::default()
    };
    let (summary, _) = theorem_summary(&stats, 1.0, &descent, 1e-4).unwrap();
    assert!(!summary.precondition_met);
    let checks = theorem_checks("uniform", &summary);
    assert!(checks
        .iter()
        .all(|c| c.status == CheckStatus::PreconditionNotMet));
    assert!(checks[0].to_string().contains("precondition not met"));
}
