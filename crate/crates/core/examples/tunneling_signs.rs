//! A packet meeting a barrier: K stays positive, K~ turns negative inside.

use qfields::verify::sign_checks;
use qfields::{
    evolve_record, extract_snapshot, make_grid, realize, EvolutionParams, Potential, StateSpec,
};

fn main() -> qfields::Result<()> {
    let grid = make_grid(&[1024], &[80.0], &[-40.0])?;
    let spec = StateSpec::gaussian(&[-15.0], &[1.0], &[2.0]);
    let barrier = Potential::smooth_barrier(2.0, 1.0, 0.0, 0.1);
    let traj = evolve_record(
        &realize(&spec, &grid)?,
        &barrier,
        &EvolutionParams::new(0.002, 7500, 500, spec.params),
    )?;
    println!(
        "{:>6} {:>12} {:>14} {:>12}",
        "t", "min K", "K~<0 inside", "min K~ in"
    );
    for snap in &traj.snapshots {
        let fs = extract_snapshot(snap, &barrier, &spec.params, 1e-12)?;
        let min_k = fs
            .unmasked()
            .map(|i| fs.k.values()[i])
            .fold(f64::INFINITY, f64::min);
        match sign_checks(&fs, 1.0) {
            Ok(checks) => {
                let c = &checks[1];
                println!(
                    "{:>6.1} {min_k:>12.3e} {:>7}/{:<6} {:>12.4}",
                    snap.time, c.values[1], c.values[2], c.values[3]
                );
            }
            Err(_) => println!("{:>6.1} {min_k:>12.3e} {:>14}", snap.time, "no density"),
        }
    }
    Ok(())
}
