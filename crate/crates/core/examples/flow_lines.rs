//! Flow lines of the three velocity fields and the ensemble histogram test.

use qfields::trajectories::{
    ensemble_equivariance, integrate_flow_lines, EquivarianceOptions, FieldChoice,
};
use qfields::{evolve_record, make_grid, realize, EvolutionParams, Potential, StateSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qfields::Result<()> {
    let grid = make_grid(&[512], &[40.0], &[-20.0])?;
    let spec = StateSpec::gaussian(&[0.0], &[0.0], &[1.0]);
    let traj = evolve_record(
        &realize(&spec, &grid)?,
        &Potential::Free,
        &EvolutionParams::new(0.01, 200, 2, spec.params),
    )?;

    let seeds: Vec<[f64; 3]> = [-2.0, -1.0, 0.5, 1.5]
        .iter()
        .map(|&x| [x, 0.0, 0.0])
        .collect();
    for choice in [FieldChoice::Cm, FieldChoice::P1, FieldChoice::P2] {
        let lines = integrate_flow_lines(&traj, &seeds, choice, 2)?;
        let ends: Vec<String> = lines
            .paths
            .iter()
            .map(|p| format!("{:+.4}", p.end()[0]))
            .collect();
        println!("{:<3} x(2) = {}", choice.name(), ends.join("  "));
    }
    let exact: Vec<String> = seeds
        .iter()
        .map(|s| format!("{:+.4}", s[0] * 2f64.sqrt()))
        .collect();
    println!("    x0 sqrt(1 + t^2/4) = {}", exact.join("  "));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let check = ensemble_equivariance(&traj, 20_000, &mut rng, &EquivarianceOptions::default())?;
    println!("total variation with 2e4 seeds: {:.4}", check.measure());
    Ok(())
}
