//! Angular momentum of a unit vortex from the operator and from the field.

use qfields::verify::operator_expectations;
use qfields::{extract_fields, make_grid, realize, AngularMomentum, Potential, StateSpec};

fn main() -> qfields::Result<()> {
    let h = 24.0 / 128.0;
    let grid = make_grid(
        &[128, 128],
        &[24.0, 24.0],
        &[-12.0 + 0.5 * h, -12.0 + 0.5 * h],
    )?;
    let spec = StateSpec::vortex2d([0.0, 0.0], 1.0);
    let psi = realize(&spec, &grid)?;
    let fs = extract_fields(&psi, &Potential::Free, &spec.params, 1e-12)?;
    let ops = operator_expectations(&psi, &fs.potential, &spec.params)?;
    if let AngularMomentum::Z(mz) = &fs.angular {
        println!("<M_z> operator {:.12}", ops.angular_momentum[0]);
        println!("<M_z> field    {:.12}", fs.average(mz.values()));
    }
    println!("masked fraction {:.4}", fs.masked_fraction());
    Ok(())
}
