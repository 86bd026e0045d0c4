//! Closed-form fields of the analytic states against the spectral read-out.

use qfields::{analytic_fields, extract_fields, make_grid, realize, Potential, StateSpec};

fn main() -> qfields::Result<()> {
    let h = 40.0 / 512.0;
    let grid = make_grid(&[512], &[40.0], &[-20.0 + 0.5 * h])?;
    let cases = [
        (
            "gaussian k=1.5",
            StateSpec::gaussian(&[-1.0], &[1.5], &[1.0]),
            Potential::Free,
        ),
        (
            "oscillator n=2",
            StateSpec::ho_eigenstate(&[2], 1.0),
            Potential::harmonic(1.0),
        ),
        (
            "sech kappa=1",
            StateSpec::evanescent(0.0, 1.0),
            Potential::Free,
        ),
    ];
    println!(
        "{:<16} {:>12} {:>12} {:>12}",
        "state", "max dp", "max dUw", "max dE"
    );
    for (name, spec, v) in cases {
        let exact = analytic_fields(&spec, &grid, &v)?;
        let numeric = extract_fields(&realize(&spec, &grid)?, &v, &spec.params, 1e-12)?;
        let core: Vec<usize> = numeric
            .unmasked()
            .filter(|&i| numeric.w.values()[i] > 1e-8)
            .collect();
        let dev = |a: &[f64], b: &[f64]| {
            core.iter()
                .map(|&i| (a[i] - b[i]).abs())
                .fold(0.0, f64::max)
        };
        println!(
            "{name:<16} {:>12.2e} {:>12.2e} {:>12.2e}",
            dev(exact.p.component(0), numeric.p.component(0)),
            dev(exact.u_w.values(), numeric.u_w.values()),
            dev(exact.e.values(), numeric.e.values()),
        );
    }
    Ok(())
}
