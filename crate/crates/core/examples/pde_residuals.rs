//! Continuity and transport residuals of a free packet under step halving.

use qfields::verify::{continuity_residual, convergence_order, transport_residual};
use qfields::{
    evolve_record, extract_snapshot, make_grid, realize, EvolutionParams, Potential, StateSpec,
};

fn residuals(dt: f64) -> qfields::Result<(f64, f64)> {
    let grid = make_grid(&[512], &[40.0], &[-20.0])?;
    let spec = StateSpec::gaussian(&[0.0], &[0.0], &[1.0]);
    let steps = (2.0 / dt).round() as usize;
    let traj = evolve_record(
        &realize(&spec, &grid)?,
        &Potential::Free,
        &EvolutionParams::new(dt, steps, 1, spec.params),
    )?;
    let fieldsets = traj
        .snapshots
        .iter()
        .map(|s| extract_snapshot(s, &Potential::Free, &spec.params, 1e-12))
        .collect::<qfields::Result<Vec<_>>>()?;
    let c = continuity_residual(&traj, &fieldsets)?;
    let t = transport_residual(&traj, &fieldsets, &Potential::Free, 1e-12)?;
    Ok((c.relative, t.residual.relative))
}

fn main() -> qfields::Result<()> {
    let mut previous: Option<(f64, f64)> = None;
    println!(
        "{:>8} {:>12} {:>6} {:>12} {:>6}",
        "dt", "continuity", "order", "transport", "order"
    );
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let (c, t) = residuals(dt)?;
        let (oc, ot) = previous.map_or((f64::NAN, f64::NAN), |(pc, pt)| {
            (convergence_order(pc, c), convergence_order(pt, t))
        });
        println!("{dt:>8.1e} {c:>12.3e} {oc:>6.2} {t:>12.3e} {ot:>6.2}");
        previous = Some((c, t));
    }
    Ok(())
}
