//! Field table of the first excited oscillator level, written as CSV.

use qfields::{extract_fields, make_grid, realize, Potential, StateSpec};

fn main() -> qfields::Result<()> {
    let h = 16.0 / 64.0;
    let grid = make_grid(&[64], &[16.0], &[-8.0 + 0.5 * h])?;
    let spec = StateSpec::ho_eigenstate(&[1], 1.0);
    let trap = Potential::harmonic(1.0);
    let fs = extract_fields(&realize(&spec, &grid)?, &trap, &spec.params, 1e-12)?;

    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "x", "w", "Kw", "Uw", "K~", "E"
    );
    for i in (0..grid.len()).step_by(4) {
        println!(
            "{:>8.3} {:>10.3e} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            grid.coordinate(0, i),
            fs.w.values()[i],
            fs.k_w.values()[i],
            fs.u_w.values()[i],
            fs.k_tilde.values()[i],
            fs.e.values()[i],
        );
    }
    let path = std::env::temp_dir().join("qfields_oscillator_n1.csv");
    fs.write_csv(std::fs::File::create(&path)?)?;
    println!("full table in {}", path.display());
    Ok(())
}
