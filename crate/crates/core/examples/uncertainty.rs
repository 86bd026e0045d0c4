//! Position and momentum variances from the fields, for Gaussians and
//! oscillator levels.

use qfields::verify::uncertainty_moments;
use qfields::{extract_fields, make_grid, realize, Potential, StateSpec};

fn main() -> qfields::Result<()> {
    let h = 40.0 / 512.0;
    let grid = make_grid(&[512], &[40.0], &[-20.0 + 0.5 * h])?;
    println!(
        "{:<18} {:>10} {:>10} {:>12}",
        "state", "D_x", "D_px", "product/0.25"
    );
    let show = |name: String, spec: StateSpec, v: Potential| -> qfields::Result<()> {
        let fs = extract_fields(&realize(&spec, &grid)?, &v, &spec.params, 1e-12)?;
        let u = uncertainty_moments(&fs)[0];
        println!(
            "{name:<18} {:>10.6} {:>10.6} {:>12.8}",
            u.position_variance,
            u.momentum_variance,
            u.product() / 0.25
        );
        Ok(())
    };
    for sigma in [0.5, 1.0, 2.0] {
        show(
            format!("gaussian s={sigma}"),
            StateSpec::gaussian(&[0.0], &[1.0], &[sigma]),
            Potential::Free,
        )?;
    }
    for n in 0..4 {
        show(
            format!("oscillator n={n}"),
            StateSpec::ho_eigenstate(&[n], 1.0),
            Potential::harmonic(1.0),
        )?;
    }
    Ok(())
}
