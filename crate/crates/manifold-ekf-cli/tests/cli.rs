//! End-to-end checks of the binary: flag handling, exit codes, CSV stability.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manifold-ekf"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn default_run_prints_a_per_variant_summary() {
    let out = run_ok(&["--duration", "1", "--variant", "baseline,naive-posterior"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("baseline"), "{stdout}");
    assert!(stdout.contains("naive-posterior+reset"), "{stdout}");
    assert!(stdout.contains("failures"), "{stdout}");
}

#[test]
fn json_summary_is_parseable_and_echoes_the_config() {
    let out = run_ok(&["--duration", "1", "--seed", "12", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["scenario"]["seed"], 12);
    assert_eq!(v["summary"][0]["variant"], "baseline");
}

#[test]
fn config_errors_exit_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"bogus": true}"#).unwrap();
    let out = bin().args(["--config"]).arg(&path).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("bogus"), "{stderr}");

    let out = bin().args(["--duration=-4"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8(out.stderr).unwrap().contains("duration"));
}

#[test]
fn missing_config_file_exits_one() {
    let out = bin()
        .args(["--config", "/no/such/path.json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn true_output_variant_is_gated() {
    let out = bin()
        .args(["--variant", "true-output", "--duration", "0.1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("--allow-true-output"));

    run_ok(&[
        "--variant",
        "true-output",
        "--duration",
        "0.1",
        "--allow-true-output",
    ]);
}

fn csv_run(path: &Path, threads: Option<&str>) {
    let mut cmd = bin();
    cmd.args([
        "--duration",
        "1",
        "--runs",
        "3",
        "--variant",
        "baseline,measurement",
        "--out",
    ])
    .arg(path);
    if let Some(t) = threads {
        cmd.env("MANIFOLD_EKF_THREADS", t);
    }
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn csv_is_byte_identical_across_reruns_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a.csv"),
        dir.path().join("b.csv"),
        dir.path().join("c.csv"),
    );
    csv_run(&a, None);
    csv_run(&b, None);
    csv_run(&c, Some("1"));
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap(), "rerun differs");
    assert_eq!(bytes_a, std::fs::read(&c).unwrap(), "thread count changes output");
    let text = String::from_utf8(bytes_a).unwrap();
    assert!(text.starts_with("t,variant,run_id,attitude_error_rad,energy\n"));
    // 2 variants x 3 runs x 51 records.
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 51);
}

#[test]
fn bad_thread_env_var_exits_two() {
    let out = bin()
        .args(["--duration", "0.1"])
        .env("MANIFOLD_EKF_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("MANIFOLD_EKF_THREADS"));
}

#[test]
fn divergence_exits_three_after_writing_output() {
    // Run 41 of the default seed diverges at its first update, so a 42-run
    // batch exercises the divergence path with only two simulated steps.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("div.csv");
    let out = bin()
        .args(["--duration", "0.04", "--runs", "42", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("run 41") && stderr.contains("diverged"), "{stderr}");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,variant,run_id,attitude_error_rad,energy\n"));
    // The diverged run still contributes its pre-failure records.
    assert!(text.lines().any(|l| l.contains(",41,")));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("1/42"), "{stdout}");
}
