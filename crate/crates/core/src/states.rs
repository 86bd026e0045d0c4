//! Closed-form initial wave functions and their exact observable fields.
//!
//! The field formulas below are obtained by differentiating the polar form
//! `ψ = √w e^{iS/ℏ}` by hand; the derivations are collected in
//! `docs/analytic_fields.md`.

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Potential;
use crate::fields::{FieldSet, RawFields};
use crate::grid::{ComplexField, Grid};

/// Reduced Planck constant and particle mass, in the same unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::natural()
    }
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let p = Self { hbar, mass };
        p.validate()?;
        Ok(p)
    }

    /// ℏ = m = 1.
    pub const fn natural() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hbar.is_finite() && self.hbar > 0.0 && self.mass.is_finite() && self.mass > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "hbar and mass must be positive (hbar = {}, mass = {})",
                self.hbar, self.mass
            )))
        }
    }
}

fn zeros() -> Vec<f64> {
    Vec::new()
}

fn unit() -> f64 {
    1.0
}

/// Kind of analytic state. Vectors are per axis; an empty `center` means the
/// coordinate origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateKind {
    /// `e^{ik·r}`; each component must be an integer multiple of `2π/L`.
    PlaneWave { k: Vec<f64> },
    /// Product of Gaussians with position spread `sigma` (so `w` has
    /// variance `sigma²` per axis) and mean momentum `momentum`.
    Gaussian {
        #[serde(default = "zeros")]
        center: Vec<f64>,
        #[serde(default = "zeros")]
        momentum: Vec<f64>,
        sigma: Vec<f64>,
    },
    /// Product of harmonic-oscillator eigenfunctions for `V = ½mω²|r-c|²`.
    HoEigenstate {
        quanta: Vec<u32>,
        omega: f64,
        #[serde(default = "zeros")]
        center: Vec<f64>,
    },
    /// `((x-cx) + i(y-cy)) e^{-|r-c|²/4σ²}`, a unit-circulation vortex.
    Vortex2d {
        #[serde(default = "zeros")]
        center: Vec<f64>,
        #[serde(default = "unit")]
        sigma: f64,
    },
    /// `sech(κ(x-c))` in one dimension: exponential tails `e^{-κ|x|}`.
    Evanescent {
        #[serde(default)]
        center: f64,
        kappa: f64,
    },
    /// Normalized sum of normalized components.
    Superposition { terms: Vec<SuperpositionTerm> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperpositionTerm {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub state: StateKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub kind: StateKind,
    pub params: PhysicalParams,
}

impl StateSpec {
    pub fn new(kind: StateKind, params: PhysicalParams) -> Self {
        Self { kind, params }
    }

    pub fn plane_wave(k: &[f64]) -> Self {
        Self::new(
            StateKind::PlaneWave { k: k.to_vec() },
            PhysicalParams::natural(),
        )
    }

    pub fn gaussian(center: &[f64], momentum: &[f64], sigma: &[f64]) -> Self {
        Self::new(
            StateKind::Gaussian {
                center: center.to_vec(),
                momentum: momentum.to_vec(),
                sigma: sigma.to_vec(),
            },
            PhysicalParams::natural(),
        )
    }

    pub fn ho_eigenstate(quanta: &[u32], omega: f64) -> Self {
        Self::new(
            StateKind::HoEigenstate {
                quanta: quanta.to_vec(),
                omega,
                center: Vec::new(),
            },
            PhysicalParams::natural(),
        )
    }

    pub fn vortex2d(center: [f64; 2], sigma: f64) -> Self {
        Self::new(
            StateKind::Vortex2d {
                center: center.to_vec(),
                sigma,
            },
            PhysicalParams::natural(),
        )
    }

    pub fn evanescent(center: f64, kappa: f64) -> Self {
        Self::new(
            StateKind::Evanescent { center, kappa },
            PhysicalParams::natural(),
        )
    }

    pub fn with_params(mut self, params: PhysicalParams) -> Self {
        self.params = params;
        self
    }
}

/// Per-axis vector of length `dim`, defaulting to zeros when empty.
fn per_axis(v: &[f64], dim: usize, what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        Ok(vec![0.0; dim])
    } else if v.len() == dim {
        Ok(v.to_vec())
    } else {
        Err(Error::InvalidState(format!(
            "{what} has {} components on a {dim}-dimensional grid",
            v.len()
        )))
    }
}

fn nyquist(grid: &Grid, axis: usize) -> f64 {
    PI / grid.spacing()[axis]
}

/// Normalized Hermite functions φ_0..=φ_n at ξ (orthonormal in ξ).
fn hermite_functions(n: u32, xi: f64) -> Vec<f64> {
    let mut phi = Vec::with_capacity(n as usize + 2);
    phi.push(PI.powf(-0.25) * (-xi * xi / 2.0).exp());
    if n >= 1 {
        phi.push(2f64.sqrt() * xi * phi[0]);
    }
    for j in 1..n as usize {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * xi * phi[j] - (jf / (jf + 1.0)).sqrt() * phi[j - 1];
        phi.push(next);
    }
    phi
}

/// φ_n(ξ) and dφ_n/dξ.
fn hermite_value_and_slope(n: u32, xi: f64) -> (f64, f64) {
    let phi = hermite_functions(n + 1, xi);
    let n_us = n as usize;
    let nf = n as f64;
    let lower = if n == 0 {
        0.0
    } else {
        (nf / 2.0).sqrt() * phi[n_us - 1]
    };
    let slope = lower - ((nf + 1.0) / 2.0).sqrt() * phi[n_us + 1];
    (phi[n_us], slope)
}

struct ResolvedKind<'a> {
    kind: &'a StateKind,
    params: PhysicalParams,
}

impl ResolvedKind<'_> {
    /// Unnormalized samples.
    fn sample(&self, grid: &Arc<Grid>) -> Result<Vec<Complex64>> {
        let dim = grid.dim();
        let hbar = self.params.hbar;
        match self.kind {
            StateKind::PlaneWave { k } => {
                let k = per_axis(k, dim, "plane-wave k")?;
                for axis in 0..dim {
                    let base = 2.0 * PI / grid.extent()[axis];
                    let m = k[axis] / base;
                    if (m - m.round()).abs() > 1e-9 * m.abs().max(1.0) {
                        return Err(Error::InvalidState(format!(
                            "plane-wave k[{axis}] = {} is not a multiple of 2π/L = {base}",
                            k[axis]
                        )));
                    }
                    if k[axis].abs() >= nyquist(grid, axis) {
                        return Err(Error::Resolution(format!(
                            "plane-wave k[{axis}] = {} reaches the Nyquist wavenumber",
                            k[axis]
                        )));
                    }
                    if k[axis] != 0.0 && 2.0 * PI / k[axis].abs() < 8.0 * grid.spacing()[axis] {
                        warn!("plane wave has fewer than 8 points per wavelength on axis {axis}");
                    }
                }
                Ok((0..grid.len())
                    .map(|i| {
                        let r = grid.position(i);
                        let phase: f64 = (0..dim).map(|a| k[a] * r[a]).sum();
                        Complex64::from_polar(1.0, phase)
                    })
                    .collect())
            }
            StateKind::Gaussian {
                center,
                momentum,
                sigma,
            } => {
                let center = per_axis(center, dim, "gaussian center")?;
                let momentum = per_axis(momentum, dim, "gaussian momentum")?;
                if sigma.len() != dim {
                    return Err(Error::InvalidState(format!(
                        "gaussian sigma has {} components on a {dim}-dimensional grid",
                        sigma.len()
                    )));
                }
                for axis in 0..dim {
                    let s = sigma[axis];
                    if !(s.is_finite() && s > 0.0) {
                        return Err(Error::InvalidState(format!(
                            "sigma[{axis}] must be positive"
                        )));
                    }
                    if s < grid.spacing()[axis] {
                        return Err(Error::Resolution(format!(
                            "sigma[{axis}] = {s} is below the grid spacing {}",
                            grid.spacing()[axis]
                        )));
                    }
                    // |ψ̂| ∝ exp(-σ²(k-k0)²) reaches round-off 6/σ away from k0
                    if (momentum[axis] / hbar).abs() + 6.0 / s > nyquist(grid, axis) {
                        warn!("gaussian spectrum is truncated by the grid on axis {axis}");
                    }
                }
                Ok((0..grid.len())
                    .map(|i| {
                        let r = grid.position(i);
                        let mut exponent = 0.0;
                        let mut phase = 0.0;
                        for a in 0..dim {
                            let d = r[a] - center[a];
                            exponent -= d * d / (4.0 * sigma[a] * sigma[a]);
                            phase += momentum[a] * r[a] / hbar;
                        }
                        Complex64::from_polar(exponent.exp(), phase)
                    })
                    .collect())
            }
            StateKind::HoEigenstate {
                quanta,
                omega,
                center,
            } => {
                let center = per_axis(center, dim, "oscillator center")?;
                if quanta.len() != dim {
                    return Err(Error::InvalidState(format!(
                        "{} quantum numbers for a {dim}-dimensional grid",
                        quanta.len()
                    )));
                }
                if !(omega.is_finite() && *omega > 0.0) {
                    return Err(Error::InvalidState(
                        "oscillator omega must be positive".into(),
                    ));
                }
                let length = (hbar / (self.params.mass * omega)).sqrt();
                for axis in 0..dim {
                    if length < grid.spacing()[axis] {
                        return Err(Error::Resolution(format!(
                            "oscillator length {length} is below the grid spacing on axis {axis}"
                        )));
                    }
                }
                Ok((0..grid.len())
                    .map(|i| {
                        let r = grid.position(i);
                        let v: f64 = (0..dim)
                            .map(|a| {
                                let xi = (r[a] - center[a]) / length;
                                hermite_functions(quanta[a], xi)[quanta[a] as usize]
                            })
                            .product();
                        Complex64::new(v, 0.0)
                    })
                    .collect())
            }
            StateKind::Vortex2d { center, sigma } => {
                if dim != 2 {
                    return Err(Error::InvalidState(
                        "vortex2d needs a 2-dimensional grid".into(),
                    ));
                }
                let center = per_axis(center, dim, "vortex center")?;
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidState("vortex sigma must be positive".into()));
                }
                if *sigma < grid.spacing()[0].max(grid.spacing()[1]) {
                    return Err(Error::Resolution("vortex sigma below grid spacing".into()));
                }
                Ok((0..grid.len())
                    .map(|i| {
                        let r = grid.position(i);
                        let (x, y) = (r[0] - center[0], r[1] - center[1]);
                        let envelope = (-(x * x + y * y) / (4.0 * sigma * sigma)).exp();
                        Complex64::new(x, y) * envelope
                    })
                    .collect())
            }
            StateKind::Evanescent { center, kappa } => {
                if dim != 1 {
                    return Err(Error::InvalidState(
                        "evanescent state is one-dimensional".into(),
                    ));
                }
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return Err(Error::InvalidState("kappa must be positive".into()));
                }
                if 1.0 / kappa < grid.spacing()[0] {
                    return Err(Error::Resolution("decay length below grid spacing".into()));
                }
                Ok((0..grid.len())
                    .map(|i| {
                        let x = grid.position(i)[0] - center;
                        Complex64::new(1.0 / (kappa * x).cosh(), 0.0)
                    })
                    .collect())
            }
            StateKind::Superposition { terms } => {
                if terms.is_empty() || terms.iter().all(|t| t.re == 0.0 && t.im == 0.0) {
                    return Err(Error::InvalidState(
                        "superposition coefficients are all zero".into(),
                    ));
                }
                let mut total = vec![Complex64::default(); grid.len()];
                for term in terms {
                    let part = realize(&StateSpec::new(term.state.clone(), self.params), grid)?;
                    let c = Complex64::new(term.re, term.im);
                    for (t, v) in total.iter_mut().zip(part.values()) {
                        *t += c * v;
                    }
                }
                Ok(total)
            }
        }
    }
}

/// Samples `spec` on `grid`, normalized so that `∫|ψ|² dr = 1`.
pub fn realize(spec: &StateSpec, grid: &Arc<Grid>) -> Result<ComplexField> {
    spec.params.validate()?;
    let values = ResolvedKind {
        kind: &spec.kind,
        params: spec.params,
    }
    .sample(grid)?;
    let mut psi = ComplexField::new(grid, values)?;
    let norm = psi.norm_squared();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::InvalidState("state vanishes on the grid".into()));
    }
    psi.scale(1.0 / norm.sqrt());
    warn_if_touching_boundary(&psi);
    Ok(psi)
}

fn warn_if_touching_boundary(psi: &ComplexField) {
    let grid = psi.grid();
    let max = psi.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = (0..grid.len())
        .filter(|&i| {
            let idx = grid.unflatten(i);
            (0..grid.dim()).any(|a| idx[a] == 0)
        })
        .map(|i| psi.values()[i].norm())
        .fold(0.0, f64::max);
    // plane waves fill the box by construction
    if edge > 1e-10 * max && edge < 0.5 * max {
        warn!(
            "wave function amplitude at the box edge is {:.2e} of its maximum",
            edge / max
        );
    }
}

/// Exact observable fields of a closed-form state in potential `potential`.
///
/// Superpositions have no closed form and return [`Error::Unsupported`].
pub fn analytic_fields(
    spec: &StateSpec,
    grid: &Arc<Grid>,
    potential: &Potential,
) -> Result<FieldSet> {
    spec.params.validate()?;
    let dim = grid.dim();
    let n = grid.len();
    let PhysicalParams { hbar, mass } = spec.params;

    // Per-point (p, p_w, U_w) from the closed forms; w from the normalized state.
    let mut p = vec![vec![0.0; n]; dim];
    let mut p_w = vec![vec![0.0; n]; dim];
    let mut u_w = vec![0.0; n];

    match &spec.kind {
        StateKind::PlaneWave { k } => {
            let k = per_axis(k, dim, "plane-wave k")?;
            for a in 0..dim {
                p[a].iter_mut().for_each(|v| *v = hbar * k[a]);
            }
        }
        StateKind::Gaussian {
            center,
            momentum,
            sigma,
        } => {
            let center = per_axis(center, dim, "gaussian center")?;
            let momentum = per_axis(momentum, dim, "gaussian momentum")?;
            for i in 0..n {
                let r = grid.position(i);
                let mut lap_ratio = 0.0;
                for a in 0..dim {
                    let s2 = sigma[a] * sigma[a];
                    let d = r[a] - center[a];
                    p[a][i] = momentum[a];
                    p_w[a][i] = -0.5 * hbar * d / s2;
                    lap_ratio += d * d / (s2 * s2) - 1.0 / s2;
                }
                u_w[i] = -hbar * hbar / (4.0 * mass) * lap_ratio;
            }
        }
        StateKind::HoEigenstate {
            quanta,
            omega,
            center,
        } => {
            let center = per_axis(center, dim, "oscillator center")?;
            let length = (hbar / (mass * omega)).sqrt();
            for i in 0..n {
                let r = grid.position(i);
                let mut lap_ratio = 0.0;
                for a in 0..dim {
                    let xi = (r[a] - center[a]) / length;
                    let (phi, slope) = hermite_value_and_slope(quanta[a], xi);
                    let log_slope = slope / phi / length;
                    // φ'' = (ξ² - (2n+1)) φ
                    let curvature = (xi * xi - (2 * quanta[a] + 1) as f64) / (length * length);
                    p_w[a][i] = hbar * log_slope;
                    lap_ratio += 2.0 * curvature + 2.0 * log_slope * log_slope;
                }
                u_w[i] = -hbar * hbar / (4.0 * mass) * lap_ratio;
            }
        }
        StateKind::Vortex2d { center, sigma } => {
            if dim != 2 {
                return Err(Error::InvalidState(
                    "vortex2d needs a 2-dimensional grid".into(),
                ));
            }
            let center = per_axis(center, dim, "vortex center")?;
            let a_coef = 1.0 / (2.0 * sigma * sigma);
            for i in 0..n {
                let r = grid.position(i);
                let (x, y) = (r[0] - center[0], r[1] - center[1]);
                let rho2 = x * x + y * y;
                p[0][i] = -hbar * y / rho2;
                p[1][i] = hbar * x / rho2;
                let radial = 1.0 / rho2 - a_coef;
                p_w[0][i] = hbar * x * radial;
                p_w[1][i] = hbar * y * radial;
                u_w[i] = -hbar * hbar / mass * (1.0 / rho2 - 3.0 * a_coef + a_coef * a_coef * rho2);
            }
        }
        StateKind::Evanescent { center, kappa } => {
            if dim != 1 {
                return Err(Error::InvalidState(
                    "evanescent state is one-dimensional".into(),
                ));
            }
            let scale = hbar * hbar * kappa * kappa / mass;
            for i in 0..n {
                let u = kappa * (grid.position(i)[0] - center);
                let sech = 1.0 / u.cosh();
                p_w[0][i] = -hbar * kappa * u.tanh();
                u_w[i] = -scale + 1.5 * scale * sech * sech;
            }
        }
        StateKind::Superposition { .. } => {
            return Err(Error::Unsupported(
                "superpositions have no closed-form fields".into(),
            ));
        }
    }

    let psi = realize(spec, grid)?;
    let w: Vec<f64> = psi.values().iter().map(|v| v.norm_sqr()).collect();
    let mask: Vec<bool> = (0..n)
        .map(|i| {
            w[i] > 0.0
                && u_w[i].is_finite()
                && (0..dim).all(|a| p[a][i].is_finite() && p_w[a][i].is_finite())
        })
        .collect();
    let v = potential.sample(grid, &spec.params)?;

    Ok(FieldSet::assemble(
        RawFields {
            w,
            p,
            p_w,
            u_w,
            energy: None,
            potential: v.into_values(),
            mask,
        },
        grid,
        spec.params,
        0.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn line(n: usize, l: f64, o: f64) -> Arc<Grid> {
        make_grid(&[n], &[l], &[o]).unwrap()
    }

    #[test]
    fn plane_wave_samples() {
        let g = line(64, 2.0 * PI, -PI);
        let psi = realize(&StateSpec::plane_wave(&[2.0]), &g).unwrap();
        let amp = 1.0 / (2.0 * PI).sqrt();
        for (i, v) in psi.values().iter().enumerate() {
            let x = g.coordinate(0, i);
            let exact = Complex64::from_polar(amp, 2.0 * x);
            assert!((v - exact).norm() < 1e-14);
        }
    }

    #[test]
    fn off_grid_plane_wave_rejected() {
        let g = line(64, 2.0 * PI, -PI);
        assert!(matches!(
            realize(&StateSpec::plane_wave(&[2.5]), &g),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            realize(&StateSpec::plane_wave(&[32.0]), &g),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn gaussian_and_ground_state_samples() {
        let g = line(256, 40.0, -20.0);
        let psi = realize(&StateSpec::gaussian(&[0.0], &[0.0], &[1.0]), &g).unwrap();
        for (i, v) in psi.values().iter().enumerate() {
            let x = g.coordinate(0, i);
            let exact = (2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp();
            assert!((v.re - exact).abs() < 1e-13 && v.im == 0.0);
        }
        let psi0 = realize(&StateSpec::ho_eigenstate(&[0], 1.0), &g).unwrap();
        for (i, v) in psi0.values().iter().enumerate() {
            let x = g.coordinate(0, i);
            let exact = PI.powf(-0.25) * (-x * x / 2.0).exp();
            assert!((v.re - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = line(512, 40.0, -20.0);
        let h = g.spacing()[0];
        for m in 0..5u32 {
            for n in 0..5u32 {
                let s: f64 = g
                    .axis_coordinates(0)
                    .iter()
                    .map(|&x| {
                        hermite_functions(m, x)[m as usize] * hermite_functions(n, x)[n as usize]
                    })
                    .sum::<f64>()
                    * h;
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-12, "<{m}|{n}> = {s}");
            }
        }
    }

    #[test]
    fn hermite_slope_matches_finite_difference() {
        for n in 0..5u32 {
            for &xi in &[-2.3, -0.7, 0.1, 1.4] {
                let d = 1e-5;
                let fd = (hermite_functions(n, xi + d)[n as usize]
                    - hermite_functions(n, xi - d)[n as usize])
                    / (2.0 * d);
                let (_, slope) = hermite_value_and_slope(n, xi);
                assert!((fd - slope).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn realize_normalizes_everything() {
        let g = make_grid(&[64, 64], &[20.0, 20.0], &[-10.0, -10.0]).unwrap();
        let specs = [
            StateSpec::gaussian(&[1.0, -0.5], &[0.3, 0.0], &[1.0, 1.5]),
            StateSpec::ho_eigenstate(&[1, 2], 1.0),
            StateSpec::vortex2d([0.0, 0.0], 1.0),
            StateSpec::new(
                StateKind::Superposition {
                    terms: vec![
                        SuperpositionTerm {
                            re: 1.0,
                            im: 0.0,
                            state: StateKind::HoEigenstate {
                                quanta: vec![0, 0],
                                omega: 1.0,
                                center: vec![],
                            },
                        },
                        SuperpositionTerm {
                            re: 0.0,
                            im: 3.0,
                            state: StateKind::HoEigenstate {
                                quanta: vec![1, 0],
                                omega: 1.0,
                                center: vec![],
                            },
                        },
                    ],
                },
                PhysicalParams::natural(),
            ),
        ];
        for spec in &specs {
            let psi = realize(spec, &g).unwrap();
            assert!((psi.norm_squared() - 1.0).abs() < 1e-12, "{spec:?}");
        }
    }

    #[test]
    fn invalid_states() {
        let g = line(64, 10.0, -5.0);
        assert!(matches!(
            realize(&StateSpec::gaussian(&[0.0], &[0.0], &[0.01]), &g),
            Err(Error::Resolution(_))
        ));
        assert!(realize(&StateSpec::gaussian(&[0.0], &[0.0], &[-1.0]), &g).is_err());
        assert!(realize(&StateSpec::vortex2d([0.0, 0.0], 1.0), &g).is_err());
        let zero = StateSpec::new(
            StateKind::Superposition {
                terms: vec![SuperpositionTerm {
                    re: 0.0,
                    im: 0.0,
                    state: StateKind::HoEigenstate {
                        quanta: vec![0],
                        omega: 1.0,
                        center: vec![],
                    },
                }],
            },
            PhysicalParams::natural(),
        );
        assert!(matches!(realize(&zero, &g), Err(Error::InvalidState(_))));
        assert!(PhysicalParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn superposition_has_no_closed_form() {
        let g = line(64, 10.0, -5.0);
        let spec = StateSpec::new(
            StateKind::Superposition {
                terms: vec![SuperpositionTerm {
                    re: 1.0,
                    im: 0.0,
                    state: StateKind::HoEigenstate {
                        quanta: vec![0],
                        omega: 1.0,
                        center: vec![],
                    },
                }],
            },
            PhysicalParams::natural(),
        );
        assert!(matches!(
            analytic_fields(&spec, &g, &Potential::Free),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn analytic_gaussian_values() {
        let g = line(256, 40.0, -20.0);
        let fs = analytic_fields(
            &StateSpec::gaussian(&[0.0], &[0.0], &[1.0]),
            &g,
            &Potential::Free,
        )
        .unwrap();
        // x = 1 sits at index 128 + 6.4, so evaluate the formulas directly
        for i in 0..g.len() {
            let x = g.coordinate(0, i);
            assert!((fs.p_w.component(0)[i] + x / 2.0).abs() < 1e-15);
            assert!((fs.k_w.values()[i] - x * x / 8.0).abs() < 1e-14);
            assert!((fs.u_w.values()[i] - (0.25 - x * x / 4.0)).abs() < 1e-13);
            assert!((fs.u.values()[i] - (0.25 - x * x / 8.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn analytic_ground_state_energy_is_flat() {
        let g = line(256, 40.0, -20.0);
        let v = Potential::harmonic(1.0);
        let fs = analytic_fields(&StateSpec::ho_eigenstate(&[0], 1.0), &g, &v).unwrap();
        for i in 0..g.len() {
            let x = g.coordinate(0, i);
            if x.abs() > 5.0 {
                continue;
            }
            assert!((fs.k_w.values()[i] - x * x / 2.0).abs() < 1e-12);
            assert!((fs.u_w.values()[i] - (0.5 - x * x)).abs() < 1e-12);
            assert!((fs.e.values()[i] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_excited_state_energy() {
        let g = line(256, 40.0, -20.0);
        let v = Potential::harmonic(2.0);
        let fs = analytic_fields(&StateSpec::ho_eigenstate(&[3], 2.0), &g, &v).unwrap();
        for i in 0..g.len() {
            if fs.mask[i] && g.coordinate(0, i).abs() < 3.0 {
                assert!((fs.e.values()[i] - 7.0).abs() < 1e-9);
            }
        }
    }
}
