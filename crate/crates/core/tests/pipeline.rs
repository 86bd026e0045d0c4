use std::path::{Path, PathBuf};

use qfields::scenario::{execute, run_scenario, Mode, Overrides, Scenario};
use sha2::{Digest, Sha256};

fn scenario_files() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_scenarios_validate() {
    let files = scenario_files();
    assert!(files.len() >= 8);
    for path in files {
        let s = Scenario::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        s.validate()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(Scenario::from_toml_str(&s.to_toml()).unwrap(), s);
    }
}

#[test]
fn outputs_follow_their_schemas() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/plane_wave.toml");
    let dir = tempfile::tempdir().unwrap();
    let overrides = Overrides {
        out: Some(dir.path().to_path_buf()),
        seed: None,
    };
    let outcome = run_scenario(&config, Mode::Run, &overrides).unwrap();
    assert_eq!(outcome.exit_code(), 0);

    let fields = std::fs::read_to_string(dir.path().join("fields_t1.0000.csv")).unwrap();
    let header: Vec<&str> = fields.lines().next().unwrap().split(',').collect();
    assert_eq!(
        header,
        [
            "t", "x", "w", "px", "pwx", "Kw", "Uw", "U", "K", "Ktilde", "E", "omega", "p1x", "p2x",
            "masked"
        ]
    );
    assert_eq!(fields.lines().count(), 1 + 64);
    for line in fields.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), header.len());
        assert_eq!(cols[cols.len() - 1], "0");
        let px: f64 = cols[3].parse().unwrap();
        assert!((px - 2.0).abs() < 1e-10);
    }

    let flow = std::fs::read_to_string(dir.path().join("flow_cm.csv")).unwrap();
    assert_eq!(flow.lines().next().unwrap(), "time,seed_id,x,flag");

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("verification.json")).unwrap())
            .unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        for key in ["name", "values", "tolerance", "passed", "masked_fraction"] {
            assert!(c.get(key).is_some(), "{key} missing in {c}");
        }
        assert_eq!(c["passed"], true, "{c}");
    }
    assert_eq!(report["scenario"]["grid"]["points"][0], 64);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let raw = std::fs::read(&config).unwrap();
    assert_eq!(manifest["config_sha256"], hex::encode(Sha256::digest(&raw)));
    for f in manifest["files"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
    assert_eq!(manifest["interpolation"], "cubic-lagrange");
}

#[test]
fn two_dimensional_pipeline_writes_angular_momentum() {
    let text = r#"
name = "vortex"
[grid]
points = [32, 32]
extent = [16.0, 16.0]
origin = [-7.75, -7.75]
[state]
kind = "vortex2d"
center = [0.0, 0.0]
sigma = 1.0
[verify]
checks = ["born", "kinetic", "two_field", "vector_identity"]
random_fields = 3
"#;
    let s = Scenario::from_toml_str(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = execute(&s, Mode::Run, dir.path(), text.as_bytes()).unwrap();
    let report = outcome.report.unwrap();
    assert!(
        report.all_passed(),
        "{:#?}",
        report.failures().collect::<Vec<_>>()
    );
    let fields = std::fs::read_to_string(dir.path().join("fields_t0.0000.csv")).unwrap();
    let header = fields.lines().next().unwrap();
    assert!(header.starts_with("t,x,y,w,px,py,pwx,pwy,"));
    assert!(header.contains(",Mz,"));
}

#[test]
fn missing_outputs_are_rejected_before_running() {
    let text = r#"
[grid]
points = [64]
extent = [20.0]
[state]
kind = "gaussian"
center = [0.0]
momentum = [0.0]
sigma = [1.0]
[verify]
checks = ["continuity"]
"#;
    let s = Scenario::from_toml_str(text).unwrap();
    assert!(s.validate().is_err());
}
