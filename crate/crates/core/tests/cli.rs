//! End-to-end checks of the `evdenoise` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evdenoise"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn evdenoise");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, name: &str, seed: u64) -> std::path::PathBuf {
    let out = dir.join(name);
    run_ok(bin().args([
        "synth",
        "--generate",
        "1200",
        "--seed",
        &seed.to_string(),
        "--output",
        out.to_str().unwrap(),
    ]));
    out
}

#[test]
fn synth_is_deterministic_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.bin", 9);
    let b = synth(dir.path(), "b.bin", 9);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let echo = fs::read_to_string(dir.path().join("a.bin.config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&echo).unwrap();
    assert_eq!(v["rng_algorithm"], "chacha8");
    assert_eq!(v["noise"]["ba_ratio"], 0.10);
    assert_eq!(v["noise"]["seed"], 9);
}

#[test]
fn denoise_eval_plot_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = synth(dir.path(), "noisy.csv", 3);
    let labeled = dir.path().join("labeled.csv");
    let out = run_ok(bin().args([
        "denoise",
        "--input",
        noisy.to_str().unwrap(),
        "--output",
        labeled.to_str().unwrap(),
        "--seed",
        "1",
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("events:"));
    assert!(dir.path().join("labeled.csv.diagnostics.json").exists());
    let echo = fs::read_to_string(dir.path().join("labeled.csv.config.json")).unwrap();
    let cfg: serde_json::Value = serde_json::from_str(&echo).unwrap();
    assert_eq!(cfg["seed"], 1);
    assert_eq!(cfg["solver"], "power");

    let report_json = dir.path().join("report.json");
    let out = run_ok(bin().args([
        "eval",
        "--pred",
        labeled.to_str().unwrap(),
        "--truth",
        noisy.to_str().unwrap(),
        "--json",
        report_json.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    for key in ["tp ", "fp ", "tn ", "fn ", "tpr ", "tnr ", "acc "] {
        assert!(text.contains(key), "missing `{key}` in:\n{text}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_json).unwrap()).unwrap();
    let acc = report["acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let svg_path = dir.path().join("plot.svg");
    run_ok(bin().args([
        "plot",
        "--input",
        labeled.to_str().unwrap(),
        "--truth",
        noisy.to_str().unwrap(),
        "--output",
        svg_path.to_str().unwrap(),
        "--projection",
        "xt",
    ]));
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn denoise_reads_microsecond_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = synth(dir.path(), "noisy.csv", 5);
    // Rewrite timestamps in microseconds; loading with --time-unit micros
    // must reproduce the seconds-based run exactly.
    let text = fs::read_to_string(&noisy).unwrap();
    let mut micros = String::from("x,y,t,label\n");
    for line in text.lines().skip(1) {
        let mut parts = line.split(',');
        let (x, y, t, l) = (
            parts.next().unwrap(),
            parts.next().unwrap(),
            parts.next().unwrap(),
            parts.next().unwrap(),
        );
        let t: f64 = t.parse().unwrap();
        micros.push_str(&format!("{x},{y},{},{l}\n", t * 1e6));
    }
    let micros_path = dir.path().join("micros.csv");
    fs::write(&micros_path, micros).unwrap();

    let out_s = dir.path().join("s.csv");
    let out_us = dir.path().join("us.csv");
    run_ok(bin().args([
        "denoise",
        "--input",
        noisy.to_str().unwrap(),
        "--output",
        out_s.to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "denoise",
        "--input",
        micros_path.to_str().unwrap(),
        "--time-unit",
        "micros",
        "--output",
        out_us.to_str().unwrap(),
    ]));
    let labels = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(labels(&out_s), labels(&out_us));
}

#[test]
fn bad_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "denoise",
            "--input",
            dir.path().join("missing.csv").to_str().unwrap(),
            "--output",
            dir.path().join("out.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "wrong,header\n1,2\n").unwrap();
    let out = bin()
        .args([
            "denoise",
            "--input",
            bad.to_str().unwrap(),
            "--output",
            dir.path().join("out.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tiny_stream_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tiny.csv");
    fs::write(&input, "x,y,t\n1,1,0.1\n").unwrap();
    let out = bin()
        .args([
            "denoise",
            "--input",
            input.to_str().unwrap(),
            "--output",
            dir.path().join("out.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
}
