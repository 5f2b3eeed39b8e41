use std::path::Path;
use std::process::{Command, Output};

use dvsbot::latency::{GyroTrace, GYRO_RATE_HZ};

fn dvsbot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvsbot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn write_trace(path: &Path, t: &GyroTrace) {
    t.write_csv(std::fs::File::create(path).unwrap()).unwrap();
}

fn wave(shift: usize, rate_hz: f64) -> GyroTrace {
    let samples = (0..2000)
        .map(|i| {
            let t = (i as f64 - shift as f64) / GYRO_RATE_HZ;
            (2.0 * std::f64::consts::PI * 0.5 * t).sin()
                + 0.4 * (2.0 * std::f64::consts::PI * 1.7 * t).cos()
        })
        .collect();
    GyroTrace::new(0, rate_hz, samples)
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim().parse().ok())
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn help_exits_zero() {
    let out = dvsbot(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["run-e2e", "gen-events", "replay", "measure-latency"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(dvsbot(&["run-e2e", "--bogus"]).status.code(), Some(1));
}

#[test]
fn short_run_with_estimation_is_rejected() {
    let out = dvsbot(&["run-e2e", "--duration-s", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));
}

#[test]
fn invalid_field_is_named() {
    let out = dvsbot(&["run-e2e", "--gain", "5000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("servo"));
}

#[test]
fn config_file_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(
        &cfg,
        "duration_s = 1.0\nestimate_delay = false\n[delays]\ncapture_ms = 3.0\n",
    )
    .unwrap();
    let out = dvsbot(&["run-e2e", "--config", path_arg(&cfg)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text
        .lines()
        .find(|l| l.contains("generated -> captured"))
        .unwrap();
    assert!(line.contains("3.000"), "{line}");

    std::fs::write(&cfg, "duraton_s = 1.0\n").unwrap();
    assert_eq!(
        dvsbot(&["run-e2e", "--config", path_arg(&cfg)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dvsbot(&[
        "run-e2e",
        "--duration-s",
        "4",
        "--out-dir",
        path_arg(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "report.txt",
        "report.csv",
        "roi.csv",
        "joints.csv",
        "gyro_master.csv",
        "gyro_slave.csv",
    ] {
        let body = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(body.lines().count() > 1, "{f} is empty");
    }
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("stage_pair,mean_ms,p50_ms,p99_ms\n"));
    assert!(csv.contains("\ntotal_xcorr,"));
}

#[test]
fn gen_events_then_replay_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let evt = dir.path().join("scene.evt");
    let (live, replayed) = (dir.path().join("live"), dir.path().join("replay"));
    let common = ["--duration-s", "3", "--seed", "9"];

    let out = dvsbot(&[&["gen-events", "-o", path_arg(&evt)][..], &common].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = dvsbot(
        &[
            &[
                "run-e2e",
                "--estimate-delay",
                "false",
                "--out-dir",
                path_arg(&live),
            ][..],
            &common,
        ]
        .concat(),
    );
    assert!(out.status.success());
    let out = dvsbot(
        &[
            &[
                "replay",
                "-i",
                path_arg(&evt),
                "--out-dir",
                path_arg(&replayed),
            ][..],
            &common,
        ]
        .concat(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let a = std::fs::read_to_string(live.join("roi.csv")).unwrap();
    let b = std::fs::read_to_string(replayed.join("roi.csv")).unwrap();
    assert!(a.lines().count() > 100);
    assert_eq!(a, b);
}

#[test]
fn replay_of_empty_file_reports_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let evt = dir.path().join("empty.evt");
    std::fs::write(&evt, b"").unwrap();
    let out = dvsbot(&["replay", "-i", path_arg(&evt)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("items: 0"));
}

#[test]
fn replay_of_corrupted_file_names_the_offset() {
    let dir = tempfile::tempdir().unwrap();
    let evt = dir.path().join("scene.evt");
    let out = dvsbot(&["gen-events", "--duration-s", "1", "-o", path_arg(&evt)]);
    assert!(out.status.success());
    let mut bytes = std::fs::read(&evt).unwrap();
    // second frame starts after one full 750-event datagram
    let second = 8 + 750 * 8;
    bytes[second + 4..second + 6].copy_from_slice(&9000u16.to_le_bytes());
    std::fs::write(&evt, &bytes).unwrap();
    let out = dvsbot(&["replay", "-i", path_arg(&evt)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("offset {second}")), "{err}");
}

#[test]
fn measure_latency_of_a_trace_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write_trace(&m, &wave(0, GYRO_RATE_HZ));
    let out = dvsbot(&[
        "measure-latency",
        "--master",
        path_arg(&m),
        "--slave",
        path_arg(&m),
    ]);
    assert!(out.status.success());
    assert!(stdout_value(&out, "delay_ms:").abs() < 1e-6);
}

#[test]
fn measure_latency_of_a_22_sample_shift() {
    let dir = tempfile::tempdir().unwrap();
    let (m, s) = (dir.path().join("m.csv"), dir.path().join("s.csv"));
    write_trace(&m, &wave(0, GYRO_RATE_HZ));
    write_trace(&s, &wave(22, GYRO_RATE_HZ));
    let out = dvsbot(&[
        "measure-latency",
        "--master",
        path_arg(&m),
        "--slave",
        path_arg(&s),
    ]);
    assert!(out.status.success());
    assert!((stdout_value(&out, "delay_ms:") - 110.0).abs() <= 0.5);
    assert_eq!(stdout_value(&out, "peak_lag_samples:"), 22.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("peak_ratio:"));
}

#[test]
fn measure_latency_rejects_mismatched_rates() {
    let dir = tempfile::tempdir().unwrap();
    let (m, s) = (dir.path().join("m.csv"), dir.path().join("s.csv"));
    write_trace(&m, &wave(0, GYRO_RATE_HZ));
    write_trace(&s, &wave(0, 100.0));
    let out = dvsbot(&[
        "measure-latency",
        "--master",
        path_arg(&m),
        "--slave",
        path_arg(&s),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn measure_latency_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "ts_us,omega_z\n0,1.0\n5000,abc\n").unwrap();
    let out = dvsbot(&[
        "measure-latency",
        "--master",
        path_arg(&m),
        "--slave",
        path_arg(&m),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
