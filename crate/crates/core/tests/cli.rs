use std::path::{Path, PathBuf};
use std::process::Command;

use qfields::scenario::Manifest;

const SMALL: &str = r#"
name = "small"

[grid]
points = [128]
extent = [30.0]

[state]
kind = "gaussian"
center = [0.0]
momentum = [0.5]
sigma = [1.0]

[evolution]
dt = 0.01
steps = 40
record_every = 4

[fields]
times = [0.0, 0.4]

[verify]
checks = ["born", "kinetic", "continuity", "transport", "two_field"]

[flow]
choices = ["cm", "p2"]
seeds = [[-1.0], [0.0], [1.0]]
ensemble = 10000
"#;

fn qfields() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qfields"));
    cmd.env_remove("QFIELDS_THREADS");
    cmd
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn manifest(out: &Path) -> Manifest {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn run_succeeds_and_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = qfields()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let m = manifest(&out);
    assert_eq!(m.subcommand, "run");
    assert_eq!(m.seed, 3);
    assert_eq!(m.exit_code, 0);
    for f in &m.files {
        let bytes = std::fs::read(out.join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes, "{}", f.path);
    }
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    for expected in [
        "fields_t0.0000.csv",
        "fields_t0.4000.csv",
        "uncertainty.csv",
        "flow_cm.csv",
        "flow_p2.csv",
        "verification.json",
    ] {
        assert!(
            names.contains(&expected),
            "{expected} missing from {names:?}"
        );
    }
}

#[test]
fn subcommands_limit_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    for (sub, present, absent) in [
        ("fields", "fields_t0.0000.csv", "flow_cm.csv"),
        ("flow", "flow_cm.csv", "fields_t0.0000.csv"),
        ("verify", "verification.json", "flow_cm.csv"),
    ] {
        let out = dir.path().join(sub);
        let status = qfields()
            .arg(sub)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "{sub}");
        assert!(out.join(present).exists(), "{sub}: {present}");
        assert!(!out.join(absent).exists(), "{sub}: {absent}");
        assert_eq!(manifest(&out).subcommand, sub);
    }
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("points = [128]", "points = [0]"));
    let out = qfields()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let missing = qfields()
        .args(["run", "--config", "/nonexistent/scenario.toml"])
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));

    let unknown = write_config(dir.path(), &format!("{SMALL}\n[extra]\nkey = 1\n"));
    let status = qfields()
        .arg("verify")
        .arg("--config")
        .arg(&unknown)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("dt = 0.01", "dt = 1e307")
        .replace("times = [0.0, 0.4]", "times = [0.0]")
        .replace("steps = 40", "steps = 4")
        .replace("record_every = 4", "record_every = 1")
        .replace(
            r#"checks = ["born", "kinetic", "continuity", "transport", "two_field"]"#,
            r#"checks = ["born"]"#,
        );
    let text = text.split("[flow]").next().unwrap().to_string();
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let status = qfields()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("[verify]", "[verify]\ncontinuity_tolerance = 1e-12");
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let status = qfields()
        .arg("verify")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert_eq!(manifest(&out).exit_code, 1);
}

#[test]
fn thread_count_from_environment_wins() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("env");
    let status = qfields()
        .env("QFIELDS_THREADS", "1")
        .arg("fields")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "3"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(manifest(&out).threads, 1);

    let flag = dir.path().join("flag");
    qfields()
        .arg("fields")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&flag)
        .args(["--threads", "3"])
        .status()
        .unwrap();
    assert_eq!(manifest(&flag).threads, 3);

    let bad = qfields()
        .env("QFIELDS_THREADS", "many")
        .arg("fields")
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = qfields()
            .arg("run")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "9", "--threads", threads])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        out
    };
    let a = run("a", "1");
    let b = run("b", "2");
    let ma = manifest(&a);
    let mb = manifest(&b);
    assert_eq!(ma.config_sha256, mb.config_sha256);
    for (fa, fb) in ma.files.iter().zip(&mb.files) {
        assert_eq!(fa.path, fb.path);
        assert_eq!(fa.sha256, fb.sha256, "{}", fa.path);
        assert_eq!(
            std::fs::read(a.join(&fa.path)).unwrap(),
            std::fs::read(b.join(&fb.path)).unwrap()
        );
    }
}

#[test]
fn selftest_passes() {
    let out = qfields().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}
