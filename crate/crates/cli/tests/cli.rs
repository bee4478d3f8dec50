use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glx_core::field::write_binary;
use glx_core::{Complex64, Grid, ShapeSpec};

const CANONICAL: &str = include_str!("../configs/extinction.toml");

fn glx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glx")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn quarter_turn_rotation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = CANONICAL.replace("theta = 0.0", "theta = 1.5707963267948966");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = glx(&["simulate", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("theta out of range"), "{}", stderr(&out));
}

#[test]
fn missing_config_is_a_validation_error() {
    let out = glx(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[params]\nm = \"zero\"\n");
    assert_eq!(glx(&["simulate", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn canonical_extinction_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", CANONICAL);
    let out_dir = dir.path().join("out");
    let out = glx(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["run.json", "trajectory.csv", "ledger.csv", "report.json", "final.bin"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["extinction"]["bound_satisfied"], serde_json::Value::Bool(true));
    assert!(report["t_star_observed"].as_f64().unwrap() > 0.0);
    assert_eq!(report["mass_nonincreasing"], serde_json::Value::Bool(true));

    let traj = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let header = traj.lines().next().unwrap();
    assert_eq!(header, "t,mass,grad_norm,lm1_norm,lp1_norm,envelope,residual");
    for line in traj.lines().skip(1) {
        let mass: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(mass.is_finite());
    }
}

#[test]
fn artifacts_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = CANONICAL.replace("t_end = 1.5", "t_end = 0.3");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |out: &Path, workers: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_glx"))
            .args(["simulate", "--config", path_str(&cfg), "--out", path_str(out)])
            .env("GLX_WORKERS", workers)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&a, "1");
    run(&b, "3");
    for name in ["run.json", "trajectory.csv", "ledger.csv", "report.json", "final.bin"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", CANONICAL);
    let out = glx(&["sweep", "--config", path_str(&cfg), "--axis", "m", "--values", ""]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let text = CANONICAL.replace("t_end = 1.5", "t_end = 0.05");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let out_dir = dir.path().join("sweep");
    let out = glx(&[
        "sweep", "--config", path_str(&cfg), "--axis", "a-modulus", "--values", "0.5,-1,2", "--out", path_str(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let status: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(status, ["invalid", "ok", "ok"]);
}

#[test]
fn scheduled_amplitude_above_threshold_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = include_str!("../configs/scheduled.toml").replace("t0 = 2.0", "t0 = 2.0\neps = 10.0");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let out = glx(&["simulate", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("exceeds"), "{}", stderr(&out));
}

#[test]
fn initial_field_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(1, 10.0, 255).unwrap();
    let u = ShapeSpec::gaussian(0.0, 1.0, Complex64::new(0.0, 1.0)).sample(grid).unwrap();
    write_binary(&u, fs::File::create(dir.path().join("u0.bin")).unwrap()).unwrap();
    let text = CANONICAL.replace("kind = \"gaussian\"", "kind = \"file\"\npath = \"u0.bin\"");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let out = glx(&["simulate", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let wrong = text.replace("points = 255", "points = 127");
    let cfg = write_config(dir.path(), "wrong.toml", &wrong);
    assert_eq!(glx(&["simulate", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn verify_recipes() {
    let out = glx(&["verify", "lemma3_2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");

    let out = glx(&["verify", "prop2_7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(glx(&["verify", "unknown"]).status.code(), Some(2));
}

#[test]
fn solve_ode_csv() {
    let out = glx(&[
        "solve-ode", "--alpha", "1", "--delta", "0.6", "--t-end", "1", "--dt-out", "0.25", "--source", "constant:0.5",
        "--z0", "1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,z");
    assert_eq!(lines.len(), 6);
    assert_eq!(glx(&["solve-ode", "--alpha", "1", "--delta", "0.6", "--t-end", "1"]).status.code(), Some(2));
}

#[test]
fn estimate_gn_and_check_admissible() {
    let out = glx(&["estimate-gn", "--m", "0.5", "--points", "63", "--family-size", "16", "--seed", "2"]);
    assert!(out.status.success());
    let est: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(est["c_gn"].as_f64().unwrap() > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", CANONICAL);
    let out = glx(&["check-admissible", "--config", path_str(&cfg)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["constants"]["eps_star"].as_f64().unwrap() > 0.0);
}
