//! Fields of observables for a single quantum particle.
//!
//! Starting from a wave function sampled on a periodic grid, this crate
//! extracts the momentum, osmotic momentum, kinetic-energy, quantum-potential,
//! energy and angular-momentum fields. States evolve under a split-step
//! spectral solver. The [`verify`] module checks the identities that tie the
//! fields together, from expectation values and uncertainty products to the
//! continuity and momentum-transport equations. Flow lines of the momentum
//! fields are integrated in [`trajectories`].
//!
//! | module | contents |
//! |---|---|
//! | [`grid`] | periodic lattices, spectral derivatives, quadrature |
//! | [`states`] | analytic wave functions and their exact fields |
//! | [`evolve`] | potentials, Hamiltonian, Strang split-step propagation |
//! | [`fields`] | field extraction, König decomposition |
//! | [`verify`] | residuals and check reports |
//! | [`trajectories`] | RK4 flow lines and ensemble equivariance |
//! | [`scenario`] | TOML scenarios, output files, the `qfields` pipeline |
//!
//! See `examples/` for one runnable program per capability.

pub mod error;
pub mod evolve;
pub mod fields;
pub mod grid;
pub mod scenario;
pub mod states;
pub mod trajectories;
pub mod verify;

pub use error::{Error, Result};
pub use evolve::{
    apply_hamiltonian, energy_expectation, evolve_record, step, EvolutionParams, Potential,
    Snapshot, SplitStep, Trajectory,
};
pub use fields::{
    extract_fields, extract_snapshot, koenig_decompose, AngularMomentum, FieldSet,
    KoenigDecomposition, DEFAULT_MASK_EPSILON,
};
pub use grid::{
    divergence, gradient, integrate, laplacian, make_grid, ComplexField, Grid, ScalarField,
    Spectral, VectorField,
};
pub use states::{analytic_fields, realize, PhysicalParams, StateKind, StateSpec};
