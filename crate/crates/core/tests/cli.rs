use std::process::Command;

use cqepi::config::bundled;
use cqepi::runner::RunReport;

fn cqepi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cqepi"))
}

#[test]
fn list_names_the_bundled_scenarios() {
    let out = cqepi().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gaussian-equality"));
    assert!(text.contains("qubit-structured"));
}

#[test]
fn demo_writes_a_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let status = cqepi()
        .args(["demo", "gaussian-equal-pair", "--grid-points", "128", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = RunReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.scenario.grid.x.points, 128);
    assert_eq!(report.summary.fail, 0);
}

#[test]
fn verify_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    let mut cfg = bundled("gaussian-equal-pair").unwrap();
    cfg.grid.x.points = 128;
    cfg.grid.y.points = 128;
    std::fs::write(&path, cfg.to_json()).unwrap();
    let out = cqepi().arg("verify").arg(&path).args(["--seed", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = RunReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.scenario.seed, 9);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut cfg = bundled("gaussian-equal-pair").unwrap();
    cfg.tolerances.entropy = -1.0;
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = cqepi().arg("verify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("tolerances.entropy"));

    let out = cqepi().args(["demo", "no-such-scenario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = cqepi().args(["verify", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    std::fs::write(&path, bundled("gaussian-equal-pair").unwrap().to_json()).unwrap();
    let out = cqepi()
        .arg("sweep")
        .arg(&path)
        .args(["--quantity", "entropy_flow", "--t", "0,1,2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,value,error_bar");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,"));
}
