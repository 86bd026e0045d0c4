//! Free packet spreading against the closed-form width.

use qfields::verify::uncertainty_moments;
use qfields::{
    evolve_record, extract_snapshot, make_grid, realize, EvolutionParams, Potential, StateSpec,
};

fn main() -> qfields::Result<()> {
    let grid = make_grid(&[512], &[40.0], &[-20.0])?;
    let spec = StateSpec::gaussian(&[0.0], &[0.0], &[1.0]);
    let traj = evolve_record(
        &realize(&spec, &grid)?,
        &Potential::Free,
        &EvolutionParams::new(0.01, 200, 20, spec.params),
    )?;
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "D_x", "exact", "product");
    for snap in &traj.snapshots {
        let fs = extract_snapshot(snap, &Potential::Free, &spec.params, 1e-12)?;
        let u = uncertainty_moments(&fs)[0];
        let exact = 1.0 + 0.25 * snap.time * snap.time;
        println!(
            "{:>6.2} {:>12.8} {:>12.8} {:>12.8}",
            snap.time,
            u.position_variance,
            exact,
            u.product()
        );
    }
    Ok(())
}
