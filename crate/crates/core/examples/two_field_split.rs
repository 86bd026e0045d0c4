//! The centre-of-mass and relative velocities of the two-field model.

use qfields::{extract_fields, koenig_decompose, make_grid, realize, Potential, StateSpec};

fn main() -> qfields::Result<()> {
    let grid = make_grid(&[256], &[30.0], &[-15.0])?;
    let spec = StateSpec::gaussian(&[0.0], &[0.8], &[1.2]);
    let fs = extract_fields(
        &realize(&spec, &grid)?,
        &Potential::Free,
        &spec.params,
        1e-12,
    )?;
    let split = koenig_decompose(&fs);
    let (v1, v2) = split.velocities();
    let kinetic = split.kinetic_energy();
    println!(
        "{:>7} {:>9} {:>9} {:>9} {:>10} {:>10}",
        "x", "V_cm", "v1", "v2", "K", "K split"
    );
    for i in (96..160).step_by(8) {
        println!(
            "{:>7.3} {:>9.4} {:>9.4} {:>9.4} {:>10.6} {:>10.6}",
            grid.coordinate(0, i),
            split.v_cm.component(0)[i],
            v1.component(0)[i],
            v2.component(0)[i],
            fs.k.values()[i],
            kinetic.values()[i],
        );
    }
    Ok(())
}
