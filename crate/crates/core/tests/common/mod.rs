//! States shared by the acceptance gate and the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use qfields::states::SuperpositionTerm;
use qfields::{
    evolve_record, extract_fields, make_grid, realize, ComplexField, EvolutionParams, FieldSet,
    Grid, PhysicalParams, Potential, StateKind, StateSpec,
};

pub struct Entry {
    pub name: String,
    pub psi: ComplexField,
    pub potential: Potential,
    pub params: PhysicalParams,
}

impl Entry {
    pub fn fields(&self) -> FieldSet {
        extract_fields(&self.psi, &self.potential, &self.params, 1e-12).unwrap()
    }
}

/// A line of `n` points over `length`, shifted half a cell so that no
/// grid point sits on a node at the origin.
pub fn offset_line(n: usize, length: f64) -> Arc<Grid> {
    let h = length / n as f64;
    make_grid(&[n], &[length], &[-0.5 * length + 0.5 * h]).unwrap()
}

pub fn offset_box(n: usize, length: f64, dim: usize) -> Arc<Grid> {
    let h = length / n as f64;
    make_grid(
        &vec![n; dim],
        &vec![length; dim],
        &vec![-0.5 * length + 0.5 * h; dim],
    )
    .unwrap()
}

fn entry(name: &str, spec: &StateSpec, grid: &Arc<Grid>, potential: Potential) -> Entry {
    Entry {
        name: name.into(),
        psi: realize(spec, grid).unwrap(),
        potential,
        params: spec.params,
    }
}

fn ho(n: u32) -> StateKind {
    StateSpec::ho_eigenstate(&[n], 1.0).kind
}

fn term(re: f64, im: f64, state: StateKind) -> SuperpositionTerm {
    SuperpositionTerm { re, im, state }
}

fn evolved(name: &str, start: Entry, dt: f64, steps: usize) -> Entry {
    let traj = evolve_record(
        &start.psi,
        &start.potential,
        &EvolutionParams::new(dt, steps, steps, start.params),
    )
    .unwrap();
    Entry {
        name: name.into(),
        psi: traj.snapshots.last().unwrap().psi.clone(),
        ..start
    }
}

/// Gaussians, boosted Gaussians, oscillator levels 0 to 3, superpositions,
/// evolved packets, the decaying profile, and 2D and 3D states.
pub fn corpus() -> Vec<Entry> {
    let line = offset_line(512, 40.0);
    let free = Potential::Free;
    let trap = Potential::harmonic(1.0);
    let mut out = Vec::new();
    for sigma in [0.5, 1.0, 2.0] {
        let spec = StateSpec::gaussian(&[0.0], &[0.0], &[sigma]);
        out.push(entry(
            &format!("gaussian sigma={sigma}"),
            &spec,
            &line,
            free.clone(),
        ));
    }
    out.push(entry(
        "boosted gaussian",
        &StateSpec::gaussian(&[-2.0], &[1.5], &[1.0]),
        &line,
        free.clone(),
    ));
    for n in 0..4 {
        let spec = StateSpec::ho_eigenstate(&[n], 1.0);
        out.push(entry(
            &format!("oscillator n={n}"),
            &spec,
            &line,
            trap.clone(),
        ));
    }
    let two_level = StateSpec::new(
        StateKind::Superposition {
            terms: vec![term(1.0, 0.0, ho(0)), term(0.0, 1.0, ho(1))],
        },
        PhysicalParams::natural(),
    );
    out.push(entry("superposition 0+i1", &two_level, &line, trap.clone()));
    let three_level = StateSpec::new(
        StateKind::Superposition {
            terms: vec![
                term(1.0, 0.0, ho(0)),
                term(0.0, 0.7, ho(2)),
                term(0.5, 0.0, ho(3)),
            ],
        },
        PhysicalParams::natural(),
    );
    out.push(entry(
        "superposition 0+0.7i2+0.5*3",
        &three_level,
        &line,
        trap.clone(),
    ));

    let packet = entry(
        "free gaussian",
        &StateSpec::gaussian(&[0.0], &[0.0], &[1.0]),
        &line,
        free.clone(),
    );
    out.push(evolved("free gaussian at t=2", packet, 1e-2, 200));
    let coherent = entry(
        "coherent state",
        &StateSpec::gaussian(&[2.0], &[0.0], &[std::f64::consts::FRAC_1_SQRT_2]),
        &line,
        trap.clone(),
    );
    out.push(evolved("coherent state at t=1", coherent, 1e-3, 1000));
    let two_level_start = entry("two-level", &two_level, &line, trap.clone());
    out.push(evolved(
        "superposition 0+i1 at t=1",
        two_level_start,
        1e-3,
        1000,
    ));

    out.push(entry(
        "sech profile",
        &StateSpec::evanescent(0.0, 1.0),
        &offset_line(512, 60.0),
        free.clone(),
    ));

    let plane = offset_box(128, 24.0, 2);
    out.push(entry(
        "vortex",
        &StateSpec::vortex2d([0.0, 0.0], 1.0),
        &plane,
        free.clone(),
    ));
    out.push(entry(
        "2D moving gaussian",
        &StateSpec::gaussian(&[1.0, 0.0], &[0.3, 1.0], &[1.0, 1.5]),
        &plane,
        free.clone(),
    ));
    let cube = offset_box(32, 20.0, 3);
    out.push(entry(
        "3D moving gaussian",
        &StateSpec::gaussian(&[0.5, 0.0, -0.5], &[0.5, 0.0, -0.3], &[1.0, 1.0, 1.0]),
        &cube,
        free,
    ));
    out
}
