//! End-to-end checks of the `muqkd` binary: flags, files, exit codes.

use std::path::Path;
use std::process::Command;

fn muqkd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_muqkd"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"
seed = 11
rounds_per_session = 3000
sessions = 2
"#;

#[test]
fn honest_run_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_RUN);
    let report = dir.path().join("report.json");
    let transcript = dir.path().join("transcript.jsonl");

    let output = muqkd()
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&report)
        .arg("--transcript")
        .arg(&transcript)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");

    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("verdict: accept"), "{stdout}");
    assert!(stdout.contains("sessions: 2"));

    let report_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report_json["aggregate"]["verdict"], "accept");
    assert_eq!(report_json["sessions"].as_array().unwrap().len(), 2);
    assert!(report_json["sessions"][0]["key_hex"].is_string());

    let lines = std::fs::read_to_string(&transcript).unwrap();
    assert_eq!(lines.lines().count(), 6000);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["session"], 0);
    assert_eq!(first["round_id"], 0);
}

#[test]
fn abort_verdict_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
seed = 5
rounds_per_session = 20000
sessions = 1

[adversary]
kind = "external_eve"
segment = "bob_to_carol"
attack_fraction = 1.0
"#,
    );
    let output = muqkd().arg("--config").arg(&config).output().unwrap();
    assert!(output.status.success(), "abort is a result, not a failure");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("verdict: abort"), "{stdout}");
}

#[test]
fn seed_override_changes_the_run_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_RUN);
    let report = dir.path().join("r.json");

    let run_with_seed = |seed: &str| -> Vec<u8> {
        let status = muqkd()
            .arg("--config")
            .arg(&config)
            .arg("--seed")
            .arg(seed)
            .arg("--out")
            .arg(&report)
            .output()
            .unwrap();
        assert!(status.status.success());
        std::fs::read(&report).unwrap()
    };

    let a1 = run_with_seed("123");
    let a2 = run_with_seed("123");
    let b = run_with_seed("124");
    assert_eq!(a1, a2);
    assert_ne!(a1, b);
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "rounds_per_session = 0\n");
    let output = muqkd().arg("--config").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("error:"), "{stderr}");
}

#[test]
fn missing_config_file_fails_nonzero() {
    let output = muqkd()
        .arg("--config")
        .arg("/nonexistent/muqkd.toml")
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert_ne!(output.status.code(), Some(0));
}

#[test]
fn sessions_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_RUN);
    let output = muqkd()
        .arg("--config")
        .arg(&config)
        .arg("--sessions")
        .arg("5")
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("sessions: 5"), "{stdout}");
}
