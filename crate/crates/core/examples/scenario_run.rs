//! Runs a scenario file and summarizes its verification report.
//!
//! `cargo run --example scenario_run -- scenarios/ho_ground_state.toml`

use std::path::PathBuf;

use qfields::scenario::{run_scenario, Mode, Overrides};

fn main() -> qfields::Result<()> {
    let config = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/ho_ground_state.toml")
        });
    let out = std::env::temp_dir().join("qfields_scenario_run");
    let outcome = run_scenario(
        &config,
        Mode::Run,
        &Overrides {
            out: Some(out),
            seed: None,
        },
    )?;
    if let Some(report) = &outcome.report {
        for c in &report.checks {
            println!(
                "{} {:<48} {:>11.3e} (tol {:.0e})",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.measure(),
                c.tolerance
            );
        }
    }
    for f in &outcome.manifest.files {
        println!(
            "{:>10}  {}",
            f.bytes,
            outcome.out_dir.join(&f.path).display()
        );
    }
    std::process::exit(outcome.exit_code());
}
