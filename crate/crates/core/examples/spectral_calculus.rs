//! Spectral derivatives on a periodic grid against closed forms.

use std::f64::consts::PI;

use qfields::{divergence, gradient, integrate, laplacian, make_grid, ScalarField};

fn main() -> qfields::Result<()> {
    let grid = make_grid(&[64, 64], &[2.0 * PI, 2.0 * PI], &[0.0, 0.0])?;
    let f = ScalarField::from_fn(&grid, |r| (2.0 * r[0]).sin() * (3.0 * r[1]).cos())?;
    let lap = laplacian(&f)?;
    let div_grad = divergence(&gradient(&f)?)?;

    let mut worst = 0.0f64;
    let mut worst_dg = 0.0f64;
    for i in 0..grid.len() {
        let exact = -13.0 * f.values()[i];
        worst = worst.max((lap.values()[i] - exact).abs());
        worst_dg = worst_dg.max((div_grad.values()[i] - lap.values()[i]).abs());
    }
    println!("max |lap f - (-13 f)|      = {worst:.2e}");
    println!("max |div grad f - lap f|   = {worst_dg:.2e}");
    println!("integral of lap f          = {:.2e}", integrate(&lap)?);
    Ok(())
}
