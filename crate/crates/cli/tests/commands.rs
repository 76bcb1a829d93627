//! Runs the built `skewrnn` binary and checks outputs and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn skewrnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewrnn")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_ring(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate", "--out", path(dir), "--name", "ring", "--freqs", "6.283185307179586", "--x0", "0.5,0",
        "--integrator", "rk4", "--steps", "4000",
    ];
    args.extend_from_slice(extra);
    skewrnn(&args)
}

#[test]
fn simulate_writes_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_ring(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["ring.csv", "ring.invariant.csv", "ring.json", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("ring.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,x2"));
    assert_eq!(csv.lines().count(), 4002);
    let sidecar: Value = serde_json::from_slice(&fs::read(dir.path().join("ring.json")).unwrap()).unwrap();
    assert_eq!(sidecar["termination"], "completed");
    assert!(sidecar["invariant_rel_drift"].as_f64().unwrap() < 1e-10);
}

#[test]
fn divergence_in_single_run_mode_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = skewrnn(&[
        "simulate", "--out", path(dir.path()), "--activation", "relu", "--freqs", "1", "--x0", "1,1",
    ]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    let sidecar: Value = serde_json::from_slice(&fs::read(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(sidecar["termination"], "diverged");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&skewrnn(&["preset", "--preset", "fig9"])), 2);
    assert_eq!(code(&skewrnn(&["simulate", "--out", path(dir.path())])), 2);
    assert_eq!(code(&skewrnn(&["preset", "--preset", "custom", "--out", path(dir.path())])), 2);
    assert_eq!(code(&skewrnn(&["classify", "--eigs", "1:x"])), 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[[run]]\nname = \"a\"\nactivation = \"softplus\"\n").unwrap();
    assert_eq!(code(&skewrnn(&["simulate", "--config", path(&bad), "--out", path(dir.path())])), 2);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = simulate_ring(&blocker.join("sub"), &[]);
    assert_eq!(code(&out), 3);
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&skewrnn(&["spectrum", "--input", path(&missing)])), 3);
    assert_eq!(code(&skewrnn(&["simulate", "--config", path(&missing)])), 3);
}

#[test]
fn analyses_of_a_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_ring(dir.path(), &["--activation", "identity"])), 0);
    let input = dir.path().join("ring.csv");

    let out = skewrnn(&["spectrum", "--input", path(&input)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("freq_hz,amplitude"));
    let (peak_freq, _) = text
        .lines()
        .skip(2)
        .map(|l| {
            let (f, a) = l.split_once(',').unwrap();
            (f.parse::<f64>().unwrap(), a.parse::<f64>().unwrap())
        })
        .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    assert!((peak_freq - 1.0).abs() <= 0.25, "peak at {peak_freq}");

    let stft_out = dir.path().join("stft.csv");
    let out = skewrnn(&[
        "stft", "--input", path(&input), "--component", "2", "--window", "1000", "--hop", "500", "--out",
        path(&stft_out),
    ]);
    assert_eq!(code(&out), 0);
    let stft = fs::read_to_string(&stft_out).unwrap();
    assert_eq!(stft.lines().next(), Some("t,freq_hz,magnitude"));
    assert_eq!(stft.lines().count(), 1 + 7 * 501);

    assert_eq!(code(&skewrnn(&["spectrum", "--input", path(&input), "--component", "3"])), 2);
    assert_eq!(code(&skewrnn(&["stft", "--input", path(&input), "--window", "8000"])), 2);

    let out = skewrnn(&["invariant", "--input", path(&input)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rel_drift="));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().next(), Some("t,H"));
}

#[test]
fn classify_reports_json() {
    let run = |args: &[&str]| -> Value {
        let out = skewrnn(args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    assert_eq!(run(&["classify", "--eigs", "-1:0,-2:0"])["class"], "asymptotically_stable");
    assert_eq!(run(&["classify", "--eigs", "1,-1"])["class"], "unstable");
    assert_eq!(run(&["classify", "--freqs", "1,2"])["class"], "marginally_stable");
    let report = run(&["classify", "--random-dim", "7", "--seed", "3"]);
    assert_eq!(report["class"], "marginally_stable");
    assert_eq!(report["eigenvalues"].as_array().unwrap().len(), 7);
    assert_eq!(code(&skewrnn(&["classify", "--freqs", "1", "--eigs", "1:0"])), 2);
}

#[test]
fn levelset_points() {
    let out = skewrnn(&["levelset", "--omega", "2", "--level", "0.5", "--points", "8"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,x1,x2");
    assert_eq!(lines.len(), 9);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let h = ((2.0 * v[1]).cosh() * (2.0 * v[2]).cosh()).ln() / 2.0;
        assert!((h - 0.5).abs() < 1e-12);
    }
    assert_eq!(code(&skewrnn(&["levelset", "--level", "-1"])), 2);
}

#[test]
fn preset_sweep_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "preset", "--preset", "fig1", "--out", path(dir.path()), "--seeds", "1", "--steps", "500", "--workers", "2",
    ];
    assert_eq!(code(&skewrnn(&args)), 0);
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 18);
    assert_eq!(manifest["global_seed"], 0);

    let first = dir.path().join("fig1_w0.1_x1_s0_identity.csv");
    let before = fs::read(&first).unwrap();
    fs::write(&first, "kept").unwrap();
    assert_eq!(code(&skewrnn(&args)), 0);
    assert_eq!(fs::read_to_string(&first).unwrap(), "kept");

    let mut fresh = args.to_vec();
    fresh.push("--no-resume");
    assert_eq!(code(&skewrnn(&fresh)), 0);
    assert_eq!(fs::read(&first).unwrap(), before);
}

#[test]
fn config_file_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("runs.toml");
    fs::write(
        &cfg,
        r#"
seed = 5

[[run]]
name = "r"
activation = "tanh"
matrix = { kind = "random_gaussian", dim = 3, std = 1.0 }
x0 = { kind = "gaussian", std = 1.0 }
steps = 300
"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(code(&skewrnn(&["simulate", "--config", path(&cfg), "--out", path(&a)])), 0);
    assert_eq!(code(&skewrnn(&["simulate", "--config", path(&cfg), "--out", path(&b), "--seed", "5"])), 0);
    assert_eq!(code(&skewrnn(&["simulate", "--config", path(&cfg), "--out", path(&c), "--seed", "6"])), 0);
    let read = |d: &Path| fs::read(d.join("r.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}
