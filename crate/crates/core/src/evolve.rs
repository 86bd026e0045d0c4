//! Time evolution under `iℏ ∂ψ/∂t = Ĥψ` with `Ĥ = p̂²/2m + V(r)`.
//!
//! Propagation uses symmetric (Strang) splitting: a half step in the
//! potential, a full kinetic step in Fourier space, another half step in
//! the potential. Both factors are pure phases, so the discrete norm is
//! preserved to round-off.

use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, ComplexField, Grid, ScalarField, Spectral, VectorField};
use crate::states::PhysicalParams;

/// Time-independent external potential.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Free,
    /// `½ m ω² |r - c|²`; empty `center` means the origin.
    Harmonic {
        omega: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Barrier of `height` on `|x - center| <= width/2` along axis 0,
    /// uniform along the other axes. A positive `smoothing` replaces the
    /// sharp edges by `tanh` steps of that width.
    Barrier {
        height: f64,
        width: f64,
        center: f64,
        #[serde(default)]
        smoothing: f64,
    },
    /// Values given directly on a grid.
    #[serde(skip)]
    Sampled(ScalarField),
}

impl Potential {
    pub fn harmonic(omega: f64) -> Self {
        Potential::Harmonic {
            omega,
            center: Vec::new(),
        }
    }

    pub fn barrier(height: f64, width: f64, center: f64) -> Self {
        Potential::Barrier {
            height,
            width,
            center,
            smoothing: 0.0,
        }
    }

    pub fn smooth_barrier(height: f64, width: f64, center: f64, smoothing: f64) -> Self {
        Potential::Barrier {
            height,
            width,
            center,
            smoothing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidState(msg.to_string()));
        match self {
            Potential::Free => Ok(()),
            Potential::Harmonic { omega, center } => {
                if !(omega.is_finite() && *omega > 0.0) {
                    return bad("harmonic omega must be positive");
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return bad("harmonic center must be finite");
                }
                Ok(())
            }
            Potential::Barrier {
                height,
                width,
                center,
                smoothing,
            } => {
                if !(height.is_finite() && width.is_finite() && *width > 0.0 && center.is_finite())
                {
                    return bad("barrier needs finite height and center and positive width");
                }
                if !(smoothing.is_finite() && *smoothing >= 0.0) {
                    return bad("barrier smoothing must be non-negative");
                }
                Ok(())
            }
            Potential::Sampled(f) => {
                if f.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite("sampled potential".into()))
                }
            }
        }
    }

    fn harmonic_center(center: &[f64], dim: usize) -> Result<[f64; 3]> {
        let mut c = [0.0; 3];
        match center.len() {
            0 => {}
            n if n == dim => c[..dim].copy_from_slice(center),
            n => {
                return Err(Error::InvalidState(format!(
                    "harmonic center has {n} components on a {dim}-dimensional grid"
                )))
            }
        }
        Ok(c)
    }

    /// V evaluated on the lattice.
    pub fn sample(&self, grid: &Arc<Grid>, params: &PhysicalParams) -> Result<ScalarField> {
        self.validate()?;
        let dim = grid.dim();
        match self {
            Potential::Free => Ok(ScalarField::constant(grid, 0.0)),
            Potential::Harmonic { omega, center } => {
                let c = Self::harmonic_center(center, dim)?;
                let stiffness = params.mass * omega * omega;
                ScalarField::from_fn(grid, |r| {
                    0.5 * stiffness * (0..dim).map(|a| (r[a] - c[a]).powi(2)).sum::<f64>()
                })
            }
            Potential::Barrier {
                height,
                width,
                center,
                smoothing,
            } => {
                let (h, w, c, s) = (*height, *width, *center, *smoothing);
                ScalarField::from_fn(grid, |r| {
                    let x = r[0] - c;
                    if s > 0.0 {
                        0.5 * h * (((x + 0.5 * w) / s).tanh() - ((x - 0.5 * w) / s).tanh())
                    } else if x.abs() <= 0.5 * w {
                        h
                    } else {
                        0.0
                    }
                })
            }
            Potential::Sampled(f) => {
                ensure_same_grid(f.grid(), grid)?;
                Ok(f.clone())
            }
        }
    }

    /// ∇V. Analytic for the built-in kinds; the impulses at sharp barrier
    /// edges are not represented (the gradient is zero on both sides).
    pub fn gradient(&self, grid: &Arc<Grid>, params: &PhysicalParams) -> Result<VectorField> {
        self.validate()?;
        let dim = grid.dim();
        match self {
            Potential::Free | Potential::Barrier { smoothing: 0.0, .. } => Ok(
                VectorField::from_raw(grid, vec![vec![0.0; grid.len()]; dim]),
            ),
            Potential::Barrier {
                height,
                width,
                center,
                smoothing,
            } => {
                let (h, w, c, s) = (*height, *width, *center, *smoothing);
                let sech2 = |u: f64| 1.0 / u.cosh().powi(2);
                VectorField::from_fn(grid, |r| {
                    let x = r[0] - c;
                    let g = 0.5 * h / s * (sech2((x + 0.5 * w) / s) - sech2((x - 0.5 * w) / s));
                    [g, 0.0, 0.0]
                })
            }
            Potential::Harmonic { omega, center } => {
                let c = Self::harmonic_center(center, dim)?;
                let stiffness = params.mass * omega * omega;
                VectorField::from_fn(grid, |r| {
                    let mut g = [0.0; 3];
                    for a in 0..dim {
                        g[a] = stiffness * (r[a] - c[a]);
                    }
                    g
                })
            }
            Potential::Sampled(f) => {
                ensure_same_grid(f.grid(), grid)?;
                f.gradient()
            }
        }
    }
}

/// `Ĥψ = -(ℏ²/2m)∇²ψ + Vψ`, computed spectrally.
pub fn apply_hamiltonian(
    psi: &ComplexField,
    potential: &Potential,
    params: &PhysicalParams,
) -> Result<ComplexField> {
    let v = potential.sample(psi.grid(), params)?;
    hamiltonian_with(psi, &v, params)
}

pub(crate) fn hamiltonian_with(
    psi: &ComplexField,
    v: &ScalarField,
    params: &PhysicalParams,
) -> Result<ComplexField> {
    ensure_same_grid(psi.grid(), v.grid())?;
    let lap = psi.laplacian()?;
    let kinetic = -params.hbar * params.hbar / (2.0 * params.mass);
    let values = lap
        .values()
        .iter()
        .zip(psi.values())
        .zip(v.values())
        .map(|((l, p), &v)| kinetic * l + v * p)
        .collect();
    ComplexField::new(psi.grid(), values)
}

/// `Re⟨ψ|Ĥ|ψ⟩`.
pub fn energy_expectation(
    psi: &ComplexField,
    potential: &Potential,
    params: &PhysicalParams,
) -> Result<f64> {
    let h_psi = apply_hamiltonian(psi, potential, params)?;
    Ok(psi.inner(&h_psi)?.re)
}

/// Precomputed Strang-splitting factors for a fixed grid, potential and dt.
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: Arc<Grid>,
    dt: f64,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
}

impl SplitStep {
    pub fn new(
        grid: &Arc<Grid>,
        potential: &Potential,
        dt: f64,
        params: &PhysicalParams,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidEvolution(format!(
                "dt must be positive (got {dt})"
            )));
        }
        let v = potential.sample(grid, params)?;
        let v_max = v.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if dt * v_max / params.hbar >= 0.5 {
            warn!("dt·max|V|/ℏ = {:.3} exceeds 0.5", dt * v_max / params.hbar);
        }
        let kinetic_phase_max = dt * params.hbar * grid.k_squared_max() / (2.0 * params.mass);
        // free evolution is exact at any dt
        if v_max > 0.0 && kinetic_phase_max >= std::f64::consts::PI {
            warn!("kinetic phase per step reaches {kinetic_phase_max:.3} rad at the grid cutoff");
        }

        let half_potential = v
            .values()
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * params.hbar)))
            .collect();
        let dim = grid.dim();
        let kinetic = (0..grid.len())
            .map(|flat| {
                let idx = grid.unflatten(flat);
                let k2: f64 = (0..dim).map(|a| grid.wavenumbers(a)[idx[a]].powi(2)).sum();
                Complex64::from_polar(1.0, -params.hbar * k2 * dt / (2.0 * params.mass))
            })
            .collect();
        Ok(Self {
            grid: Arc::clone(grid),
            dt,
            half_potential,
            kinetic,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `psi` by one step in place.
    pub fn advance(&self, psi: &mut ComplexField) -> Result<()> {
        ensure_same_grid(&self.grid, psi.grid())?;
        let values = psi.values_mut();
        for (v, f) in values.iter_mut().zip(&self.half_potential) {
            *v *= f;
        }
        self.grid.forward_fft(values);
        for (v, f) in values.iter_mut().zip(&self.kinetic) {
            *v *= f;
        }
        self.grid.inverse_fft(values);
        for (v, f) in values.iter_mut().zip(&self.half_potential) {
            *v *= f;
        }
        Ok(())
    }
}

/// One Strang step. For repeated stepping build a [`SplitStep`] once.
pub fn step(
    psi: &ComplexField,
    potential: &Potential,
    dt: f64,
    params: &PhysicalParams,
) -> Result<ComplexField> {
    let propagator = SplitStep::new(psi.grid(), potential, dt, params)?;
    let mut out = psi.clone();
    propagator.advance(&mut out)?;
    if !out.is_finite() {
        return Err(Error::NumericalAbort { step: 1, time: dt });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    #[serde(skip, default)]
    pub params: PhysicalParams,
}

impl EvolutionParams {
    pub fn new(dt: f64, steps: usize, record_every: usize, params: PhysicalParams) -> Self {
        Self {
            dt,
            steps,
            record_every,
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidEvolution(format!(
                "dt must be positive (got {})",
                self.dt
            )));
        }
        if self.steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidEvolution(
                "steps and record_every must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Time of the last recorded snapshot.
    pub fn final_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub psi: ComplexField,
}

/// Recorded evolution. Snapshot times are strictly increasing and, apart
/// from a possibly shorter final interval, uniformly spaced.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub potential: Potential,
    pub params: PhysicalParams,
    pub record_interval: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<Grid> {
        self.snapshots[0].psi.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.snapshots[0].time,
            self.snapshots[self.snapshots.len() - 1].time,
        )
    }

    /// Snapshot whose time is within half a step of `t`.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 0.5 * self.record_interval;
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= tol.max(1e-12))
    }

    /// True when every interval equals the recording interval.
    pub fn is_uniform(&self) -> bool {
        self.snapshots.windows(2).all(|w| {
            ((w[1].time - w[0].time) - self.record_interval).abs() <= 1e-9 * self.record_interval
        })
    }
}

/// Evolves `psi0`, keeping every `record_every`-th state plus `t = 0` and
/// the final state.
pub fn evolve_record(
    psi0: &ComplexField,
    potential: &Potential,
    evolution: &EvolutionParams,
) -> Result<Trajectory> {
    evolution.validate()?;
    let params = evolution.params;
    let propagator = SplitStep::new(psi0.grid(), potential, evolution.dt, &params)?;
    let mut psi = psi0.clone();
    let mut snapshots = vec![Snapshot {
        time: 0.0,
        psi: psi.clone(),
    }];
    for n in 1..=evolution.steps {
        propagator.advance(&mut psi)?;
        let time = n as f64 * evolution.dt;
        if !psi.is_finite() {
            return Err(Error::NumericalAbort { step: n, time });
        }
        if n % evolution.record_every == 0 || n == evolution.steps {
            snapshots.push(Snapshot {
                time,
                psi: psi.clone(),
            });
        }
    }
    Ok(Trajectory {
        snapshots,
        potential: potential.clone(),
        params,
        record_interval: evolution.record_every as f64 * evolution.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::states::{realize, StateSpec};
    use std::f64::consts::PI;

    #[test]
    fn smooth_barrier_gradient_matches_spectral() {
        // fine enough that the tanh edges are resolved spectrally
        let g = make_grid(&[2048], &[40.0], &[-20.0]).unwrap();
        let params = PhysicalParams::natural();
        let v = Potential::smooth_barrier(2.0, 1.0, 0.5, 0.3);
        let sampled = v.sample(&g, &params).unwrap();
        let spectral = sampled.gradient().unwrap();
        let analytic = v.gradient(&g, &params).unwrap();
        for (a, b) in analytic.component(0).iter().zip(spectral.component(0)) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        let peak = sampled.values().iter().cloned().fold(0.0, f64::max);
        let top = 2.0 * (0.5f64 / 0.3).tanh();
        assert!(peak <= top && top - peak < 1e-3, "{peak} {top}");
    }

    #[test]
    fn plane_wave_is_kinetic_eigenstate() {
        let g = make_grid(&[64], &[2.0 * PI], &[-PI]).unwrap();
        let psi = realize(&StateSpec::plane_wave(&[3.0]), &g).unwrap();
        let params = PhysicalParams::natural();
        let h_psi = apply_hamiltonian(&psi, &Potential::Free, &params).unwrap();
        for (h, p) in h_psi.values().iter().zip(psi.values()) {
            assert!((h - 4.5 * p).norm() < 1e-12);
        }
    }

    #[test]
    fn ground_state_eigenvalue() {
        let g = make_grid(&[256], &[40.0], &[-20.0]).unwrap();
        let psi = realize(&StateSpec::ho_eigenstate(&[0], 1.0), &g).unwrap();
        let h_psi =
            apply_hamiltonian(&psi, &Potential::harmonic(1.0), &PhysicalParams::natural()).unwrap();
        let residual = h_psi
            .values()
            .iter()
            .zip(psi.values())
            .map(|(h, p)| (h - 0.5 * p).norm())
            .fold(0.0, f64::max);
        assert!(residual < 1e-8, "residual {residual}");
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = make_grid(&[32], &[10.0], &[0.0]).unwrap();
        let zero = ComplexField::zeros(&g);
        let h = apply_hamiltonian(&zero, &Potential::harmonic(1.0), &PhysicalParams::natural())
            .unwrap();
        assert!(h.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sampled_potential_on_other_grid_rejected() {
        let g1 = make_grid(&[32], &[10.0], &[0.0]).unwrap();
        let g2 = make_grid(&[32], &[11.0], &[0.0]).unwrap();
        let v = Potential::Sampled(ScalarField::constant(&g2, 1.0));
        let psi = ComplexField::zeros(&g1);
        assert!(matches!(
            apply_hamiltonian(&psi, &v, &PhysicalParams::natural()),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn free_plane_wave_phase_advance() {
        let g = make_grid(&[64], &[2.0 * PI], &[-PI]).unwrap();
        let psi = realize(&StateSpec::plane_wave(&[2.0]), &g).unwrap();
        let dt = 0.013;
        let out = step(&psi, &Potential::Free, dt, &PhysicalParams::natural()).unwrap();
        let phase = Complex64::from_polar(1.0, -2.0 * dt);
        for (a, b) in out.values().iter().zip(psi.values()) {
            assert!((a - phase * b).norm() < 1e-14);
        }
    }

    #[test]
    fn step_preserves_norm() {
        let g = make_grid(&[128], &[30.0], &[-15.0]).unwrap();
        let psi = realize(&StateSpec::gaussian(&[-2.0], &[1.5], &[0.8]), &g).unwrap();
        let out = step(
            &psi,
            &Potential::barrier(2.0, 1.0, 0.0),
            0.01,
            &PhysicalParams::natural(),
        )
        .unwrap();
        assert!((out.norm_squared() - psi.norm_squared()).abs() < 1e-13);
    }

    #[test]
    fn ground_state_is_stationary() {
        let g = make_grid(&[256], &[40.0], &[-20.0]).unwrap();
        let psi0 = realize(&StateSpec::ho_eigenstate(&[0], 1.0), &g).unwrap();
        let evo = EvolutionParams::new(1e-3, 1000, 1000, PhysicalParams::natural());
        let traj = evolve_record(&psi0, &Potential::harmonic(1.0), &evo).unwrap();
        let last = &traj.snapshots.last().unwrap().psi;
        let overlap = psi0.inner(last).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-6, "overlap {overlap}");
    }

    #[test]
    fn recording_schedule() {
        let g = make_grid(&[32], &[10.0], &[-5.0]).unwrap();
        let psi0 = realize(&StateSpec::gaussian(&[0.0], &[0.0], &[1.0]), &g).unwrap();
        let evo = EvolutionParams::new(0.01, 100, 10, PhysicalParams::natural());
        let traj = evolve_record(&psi0, &Potential::Free, &evo).unwrap();
        assert_eq!(traj.snapshots.len(), 11);
        for (n, s) in traj.snapshots.iter().enumerate() {
            assert!((s.time - n as f64 * 0.1).abs() < 1e-12);
        }
        assert!(traj.is_uniform());

        // final state is always kept even off the recording cadence
        let evo = EvolutionParams::new(0.01, 25, 10, PhysicalParams::natural());
        let traj = evolve_record(&psi0, &Potential::Free, &evo).unwrap();
        assert_eq!(traj.times().len(), 4);
        assert!((traj.span().1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn absurd_dt_aborts() {
        let g = make_grid(&[64], &[20.0], &[-10.0]).unwrap();
        let psi0 = realize(&StateSpec::gaussian(&[0.0], &[0.0], &[1.0]), &g).unwrap();
        let evo = EvolutionParams::new(1e307, 3, 1, PhysicalParams::natural());
        let err = evolve_record(&psi0, &Potential::Free, &evo).unwrap_err();
        assert!(
            matches!(err, Error::NumericalAbort { step: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn invalid_parameters() {
        let evo = EvolutionParams::new(0.0, 3, 1, PhysicalParams::natural());
        assert!(evo.validate().is_err());
        let evo = EvolutionParams::new(0.1, 0, 1, PhysicalParams::natural());
        assert!(evo.validate().is_err());
        assert!(Potential::barrier(1.0, -1.0, 0.0).validate().is_err());
    }
}
