use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn testbed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miot-testbed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn fixtures_lists_bundled_configs() {
    let out = testbed(&["fixtures"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for name in ["paper-plain-passive", "paper-plain-active", "paper-encrypted-passive", "paper-encrypted-active", "bench-paper"] {
        assert!(names.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn summary_reconciles_with_logs() {
    for fixture in ["paper-plain-active", "paper-encrypted-active"] {
        let dir = tempfile::tempdir().unwrap();
        let out = testbed(&["run", "--config", fixture, "--out", dir.path().to_str().unwrap(), "--messages", "12"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        let counts = &summary["counts"];

        let server = jsonl(&dir.path().join("server_log.jsonl"));
        assert_eq!(counts["received"], server.len());
        let with = |d: &str| server.iter().filter(|r| r["detection"] == d).count();
        assert_eq!(counts["accepted"], with("None"));
        assert_eq!(counts["rejected"]["padding_error"], with("PaddingError"));
        assert_eq!(counts["rejected"]["parse_error"], with("ParseError"));

        let device = jsonl(&dir.path().join("device_log.jsonl"));
        assert_eq!(counts["transmissions"], device.iter().filter(|e| e["event"] == "sent").count());

        let intercepts: Vec<Value> = jsonl(&dir.path().join("intercept_log.jsonl"))
            .into_iter()
            .filter(|e| !e["message"].is_null() && e["direction"] == "to_peer")
            .collect();
        assert_eq!(counts["intercepted"], intercepts.len());
        assert_eq!(counts["readable"], intercepts.iter().filter(|e| !e["extraction"].is_null()).count());
        assert_eq!(counts["tampered"], intercepts.iter().filter(|e| e["original"] != e["forwarded"]).count());

        for artifact in summary["artifacts"].as_array().unwrap() {
            assert!(dir.path().join(artifact.as_str().unwrap()).is_file());
        }
    }
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = testbed(&["run", "--config", "paper-plain-active", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    for file in ["capture.jsonl", "server_log.jsonl", "intercept_log.jsonl", "impact.md", "impact.json", "summary.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_override_changes_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let out = testbed(&["run", "--config", "paper-plain-passive", "--messages", "5", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_ne!(
        fs::read(a.path().join("server_log.jsonl")).unwrap(),
        fs::read(b.path().join("server_log.jsonl")).unwrap()
    );
}

#[test]
fn bench_prints_requested_format_and_report_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = testbed(&["bench", "--config", "bench-paper", "--messages", "80", "--format", "csv", "--out", out_dir]);
    assert!(out.status.success());
    assert_eq!(out.stdout, fs::read(dir.path().join("report.csv")).unwrap());
    for name in ["report.md", "report.csv", "samples.jsonl"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let again = testbed(&["report", "--out", out_dir]);
    assert!(again.status.success());
    assert_eq!(again.stdout, fs::read(dir.path().join("report.md")).unwrap());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = dir.path().join("no-seed.json");
    fs::write(&no_seed, r#"{"name": "x", "messages": 3}"#).unwrap();
    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"name": "x", "seed": 1, "messages": 3, "extra": true}"#).unwrap();
    let cases: [Vec<&str>; 5] = [
        vec!["run", "--config", no_seed.to_str().unwrap()],
        vec!["run", "--config", unknown.to_str().unwrap()],
        vec!["run", "--config", "does-not-exist.json"],
        vec!["bench", "--config", "bench-paper", "--messages", "0", "--out", dir.path().to_str().unwrap()],
        vec!["run", "--config", "bench-paper", "--format", "pdf"],
    ];
    for args in cases {
        let out = testbed(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = testbed(&["run", "--config", no_seed.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed required"));
}
