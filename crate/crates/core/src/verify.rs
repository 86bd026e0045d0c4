//! Quantitative checks of the identities, inequalities and transport
//! equations satisfied by the observable fields.
//!
//! Every check carries its tolerance and a precomputed pass flag. By
//! convention `values[0]` is the quantity compared against the tolerance;
//! the remaining entries give context (operator value, field integral, …)
//! in the order documented on each function.
//!
//! Residual norms only run over unmasked points and report the masked
//! fraction next to the value.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{hamiltonian_with, Potential, Trajectory};
use crate::fields::{amplitude_quantum_potential, field_derivatives, AngularMomentum, FieldSet};
use crate::grid::{divergence, ComplexField, Grid, ScalarField, Spectral, Spectrum, VectorField};
use crate::states::PhysicalParams;

/// Relative tolerance for expectation-value consistency.
pub const BORN_TOLERANCE: f64 = 1e-8;
/// Relative slack on the uncertainty bound `D_p D_x >= ℏ²/4`.
pub const UNCERTAINTY_SLACK: f64 = 1e-8;
/// `|∫K w - ∫K̃ w| / ⟨K̂⟩`.
pub const KINETIC_EQUIVALENCE_TOLERANCE: f64 = 1e-8;
/// `|∫U_w w|`, absolute in the scenario's units.
pub const QUANTUM_POTENTIAL_MEAN_TOLERANCE: f64 = 1e-10;
pub const TWO_FIELD_TOLERANCE: f64 = 1e-12;
pub const VECTOR_IDENTITY_TOLERANCE: f64 = 1e-8;
/// `min K >= -KINETIC_SIGN_SLACK · E_scale`.
pub const KINETIC_SIGN_SLACK: f64 = 1e-10;
/// Fraction of in-barrier points required to show `K̃ < 0`.
pub const NEGATIVE_K_TILDE_FRACTION: f64 = 0.01;
/// Time-derivative norms below this are treated as stationary and the
/// residual is judged in absolute terms.
pub const STATIONARY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub values: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub masked_fraction: f64,
}

impl Check {
    /// Passes when `measure <= tolerance`.
    pub fn at_most(
        name: impl Into<String>,
        measure: f64,
        tolerance: f64,
        context: &[f64],
        masked_fraction: f64,
    ) -> Self {
        Self::build(
            name,
            measure,
            tolerance,
            measure <= tolerance,
            context,
            masked_fraction,
        )
    }

    /// Passes when `measure >= threshold`.
    pub fn at_least(
        name: impl Into<String>,
        measure: f64,
        threshold: f64,
        context: &[f64],
        masked_fraction: f64,
    ) -> Self {
        Self::build(
            name,
            measure,
            threshold,
            measure >= threshold,
            context,
            masked_fraction,
        )
    }

    fn build(
        name: impl Into<String>,
        measure: f64,
        tolerance: f64,
        passed: bool,
        context: &[f64],
        masked_fraction: f64,
    ) -> Self {
        let mut values = Vec::with_capacity(context.len() + 1);
        values.push(measure);
        values.extend_from_slice(context);
        Self {
            name: name.into(),
            passed: passed && measure.is_finite(),
            values,
            tolerance,
            masked_fraction,
        }
    }

    pub fn measure(&self) -> f64 {
        self.values[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub points: Vec<usize>,
    pub extent: Vec<f64>,
    pub origin: Vec<f64>,
}

impl From<&Grid> for GridMetadata {
    fn from(g: &Grid) -> Self {
        Self {
            points: g.shape().to_vec(),
            extent: g.extent().to_vec(),
            origin: g.origin().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetadata {
    pub grid: GridMetadata,
    pub state: serde_json::Value,
    pub potential: serde_json::Value,
    pub params: PhysicalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioMetadata>,
}

impl VerificationReport {
    pub fn new(scenario: Option<ScenarioMetadata>) -> Self {
        Self {
            checks: Vec::new(),
            scenario,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn rel_diff(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale
}

/// Expectation values straight from the operators, independent of the
/// field extraction.
#[derive(Debug, Clone)]
pub struct OperatorExpectations {
    /// `⟨p̂⟩` per axis, evaluated in momentum space.
    pub momentum: Vec<f64>,
    /// `(1/2m) Re∫ψ* p̂²ψ`.
    pub kinetic_laplacian_form: f64,
    /// `(1/2m) ∫|p̂ψ|²`.
    pub kinetic_gradient_form: f64,
    pub hamiltonian: f64,
    pub potential: f64,
    /// `⟨M̂_z⟩` in 2D, `⟨M̂⟩` in 3D, empty in 1D.
    pub angular_momentum: Vec<f64>,
}

pub fn operator_expectations(
    psi: &ComplexField,
    v: &ScalarField,
    params: &PhysicalParams,
) -> Result<OperatorExpectations> {
    let grid = psi.grid();
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let PhysicalParams { hbar, mass } = *params;

    let spectrum = Spectrum::of_complex(psi)?;
    let mut coeffs = psi.values().to_vec();
    grid.forward_fft(&mut coeffs);
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    // odd derivative convention: the Nyquist mode carries no momentum
    let momentum = (0..dim)
        .map(|a| {
            let k = spectrum.derivative(&{
                let mut o = vec![0u32; dim];
                o[a] = 1;
                o
            });
            // ⟨p̂⟩ = Re∫ψ*(-iℏ∂ψ); evaluate through Parseval on the derivative
            let mut d = k;
            grid.forward_fft(&mut d);
            let s: Complex64 = coeffs.iter().zip(&d).map(|(c, d)| c.conj() * d).sum();
            (Complex64::new(0.0, -hbar) * s).re / total
        })
        .collect();

    let grad = psi.gradient()?;
    let lap = psi.laplacian()?;
    let kinetic_laplacian_form = -hbar * hbar / (2.0 * mass) * psi.inner(&lap)?.re;
    let kinetic_gradient_form =
        hbar * hbar / (2.0 * mass) * grad.iter().map(|g| g.norm_squared()).sum::<f64>();
    let h_psi = hamiltonian_with(psi, v, params)?;
    let hamiltonian = psi.inner(&h_psi)?.re;
    let potential = psi
        .values()
        .iter()
        .zip(v.values())
        .map(|(p, v)| p.norm_sqr() * v)
        .sum::<f64>()
        * dv;

    let angular = |i: usize, j: usize| -> f64 {
        // ⟨r_i p̂_j - r_j p̂_i⟩
        let s: Complex64 = (0..grid.len())
            .map(|n| {
                let r = grid.position(n);
                let op = Complex64::new(0.0, -hbar)
                    * (grad[j].values()[n] * r[i] - grad[i].values()[n] * r[j]);
                psi.values()[n].conj() * op
            })
            .sum();
        s.re * dv
    };
    let angular_momentum = match dim {
        2 => vec![angular(0, 1)],
        3 => vec![angular(1, 2), angular(2, 0), angular(0, 1)],
        _ => Vec::new(),
    };

    Ok(OperatorExpectations {
        momentum,
        kinetic_laplacian_form,
        kinetic_gradient_form,
        hamiltonian,
        potential,
        angular_momentum,
    })
}

/// Field averages against operator expectation values.
///
/// Values per check: `[relative difference, operator value, field average]`.
/// Momenta are compared on the scale `max(|⟨p̂⟩|, √(2m⟨K̂⟩))`, energies on
/// `max(|⟨Ĥ⟩|, ⟨K̂⟩ + |⟨V⟩|)`, angular momenta on `max(|⟨M̂⟩|, ℏ)`.
pub fn born_consistency(
    psi: &ComplexField,
    fs: &FieldSet,
    params: &PhysicalParams,
) -> Result<Vec<Check>> {
    let ops = operator_expectations(psi, &fs.potential, params)?;
    let mf = fs.masked_fraction();
    let mut checks = Vec::new();

    let kinetic = ops.kinetic_gradient_form;
    let p_scale = (2.0 * params.mass * kinetic).sqrt();
    for (a, &op) in ops.momentum.iter().enumerate() {
        let field = fs.average(fs.p.component(a));
        let scale = op.abs().max(p_scale).max(f64::MIN_POSITIVE);
        checks.push(Check::at_most(
            format!("born.momentum.{}", AXES[a]),
            rel_diff(op, field, scale),
            BORN_TOLERANCE,
            &[op, field],
            mf,
        ));
    }

    let k_scale = kinetic.abs().max(f64::MIN_POSITIVE);
    checks.push(Check::at_most(
        "born.kinetic.operator_forms",
        rel_diff(
            ops.kinetic_laplacian_form,
            ops.kinetic_gradient_form,
            k_scale,
        ),
        BORN_TOLERANCE,
        &[ops.kinetic_laplacian_form, ops.kinetic_gradient_form],
        mf,
    ));
    let k_field = fs.average(fs.k.values());
    checks.push(Check::at_most(
        "born.kinetic.K",
        rel_diff(ops.kinetic_gradient_form, k_field, k_scale),
        BORN_TOLERANCE,
        &[ops.kinetic_gradient_form, k_field],
        mf,
    ));
    let kt_field = fs.average(fs.k_tilde.values());
    checks.push(Check::at_most(
        "born.kinetic.K_tilde",
        rel_diff(ops.kinetic_laplacian_form, kt_field, k_scale),
        BORN_TOLERANCE,
        &[ops.kinetic_laplacian_form, kt_field],
        mf,
    ));

    let e_field = fs.average(fs.e.values());
    let e_scale = ops
        .hamiltonian
        .abs()
        .max(kinetic + ops.potential.abs())
        .max(f64::MIN_POSITIVE);
    checks.push(Check::at_most(
        "born.energy",
        rel_diff(ops.hamiltonian, e_field, e_scale),
        BORN_TOLERANCE,
        &[ops.hamiltonian, e_field],
        mf,
    ));

    let m_fields: Vec<&[f64]> = match &fs.angular {
        AngularMomentum::Absent => Vec::new(),
        AngularMomentum::Z(mz) => vec![mz.values()],
        AngularMomentum::Vector(m) => m.components().iter().map(|c| c.as_slice()).collect(),
    };
    let labels: &[&str] = if m_fields.len() == 1 { &["z"] } else { &AXES };
    for ((op, field), label) in ops.angular_momentum.iter().zip(m_fields).zip(labels) {
        let field = fs.average(field);
        let scale = op.abs().max(params.hbar);
        checks.push(Check::at_most(
            format!("born.angular_momentum.{label}"),
            rel_diff(*op, field, scale),
            BORN_TOLERANCE,
            &[*op, field],
            mf,
        ));
    }
    Ok(checks)
}

/// The two expectation-value forms of the kinetic energy agree:
/// `∫K w = ∫K̃ w`, i.e. `∫U_w w = 0`.
///
/// Values: `[|∫K w - ∫K̃ w| / ⟨K⟩, ∫K w, ∫K̃ w]` and
/// `[|∫U_w w|, ∫U_w w]`.
///
/// `U_w w = -(ℏ²/4m)∇²w` stays finite at a node, so a node that falls
/// exactly on a grid point is masked and its cell's share goes missing.
/// Grids for states with nodes should be offset to avoid this.
pub fn kinetic_equivalence(fs: &FieldSet) -> Vec<Check> {
    let mf = fs.masked_fraction();
    let k = fs.average(fs.k.values());
    let kt = fs.average(fs.k_tilde.values());
    let uw = fs.average(fs.u_w.values());
    vec![
        Check::at_most(
            "kinetic.equivalence",
            (k - kt).abs() / k.abs().max(f64::MIN_POSITIVE),
            KINETIC_EQUIVALENCE_TOLERANCE,
            &[k, kt],
            mf,
        ),
        Check::at_most(
            "kinetic.quantum_potential_mean",
            uw.abs(),
            QUANTUM_POTENTIAL_MEAN_TOLERANCE,
            &[uw],
            mf,
        ),
    ]
}

/// Position and osmotic-momentum variances of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyProduct {
    pub mean_position: f64,
    pub position_variance: f64,
    pub momentum_variance: f64,
}

impl UncertaintyProduct {
    pub fn product(&self) -> f64 {
        self.position_variance * self.momentum_variance
    }
}

/// `D_x = ∫(x-⟨x⟩)²w` and `D_px = ∫(p_w^x)² w` per axis.
pub fn uncertainty_moments(fs: &FieldSet) -> Vec<UncertaintyProduct> {
    let grid = fs.grid();
    let w = fs.w.values();
    let dv = grid.cell_volume();
    (0..grid.dim())
        .map(|a| {
            let x: Vec<f64> = (0..grid.len()).map(|i| grid.position(i)[a]).collect();
            let mean = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() * dv;
            let var = x
                .iter()
                .zip(w)
                .map(|(x, w)| (x - mean).powi(2) * w)
                .sum::<f64>()
                * dv;
            let pw = fs.p_w.component(a);
            let dp = fs.average(&pw.iter().map(|v| v * v).collect::<Vec<_>>());
            UncertaintyProduct {
                mean_position: mean,
                position_variance: var,
                momentum_variance: dp,
            }
        })
        .collect()
}

/// `D_px·D_x >= ℏ²/4 (1 - slack)` per axis.
///
/// Values: `[1 - D_px D_x/(ℏ²/4), D_x, D_px, D_px D_x]`; passes when the
/// relative shortfall is at most the slack.
pub fn uncertainty_products(fs: &FieldSet) -> Vec<Check> {
    let bound = fs.params.hbar * fs.params.hbar / 4.0;
    let mf = fs.masked_fraction();
    uncertainty_moments(fs)
        .into_iter()
        .enumerate()
        .map(|(a, u)| {
            Check::at_most(
                format!("uncertainty.{}", AXES[a]),
                1.0 - u.product() / bound,
                UNCERTAINTY_SLACK,
                &[u.position_variance, u.momentum_variance, u.product()],
                mf,
            )
        })
        .collect()
}

/// Pointwise `½(p₁+p₂) = p` and `½(|p₁|²+|p₂|²)/2m = K`, relative to
/// `max(1, |p|)` and `max(1, K)`.
///
/// Values: `[max deviation]`.
pub fn two_field_identities(fs: &FieldSet) -> Vec<Check> {
    let dim = fs.grid().dim();
    let m = fs.params.mass;
    let mut mean_dev = 0.0_f64;
    let mut energy_dev = 0.0_f64;
    for i in fs.unmasked() {
        let p = fs.p.at(i);
        let p1 = fs.p1.at(i);
        let p2 = fs.p2.at(i);
        let mut e = 0.0;
        for a in 0..dim {
            mean_dev = mean_dev.max((0.5 * (p1[a] + p2[a]) - p[a]).abs() / p[a].abs().max(1.0));
            e += p1[a] * p1[a] + p2[a] * p2[a];
        }
        let k = fs.k.values()[i];
        energy_dev = energy_dev.max((0.25 * e / m - k).abs() / k.abs().max(1.0));
    }
    let mf = fs.masked_fraction();
    vec![
        Check::at_most(
            "two_field.mean_momentum",
            mean_dev,
            TWO_FIELD_TOLERANCE,
            &[],
            mf,
        ),
        Check::at_most(
            "two_field.kinetic_energy",
            energy_dev,
            TWO_FIELD_TOLERANCE,
            &[],
            mf,
        ),
    ]
}

/// Energy field against its decomposition `|p|²/2m + U + V` and the
/// frequency field against `E/ℏ`, relative to the largest term.
pub fn energy_field_consistency(fs: &FieldSet) -> Vec<Check> {
    let m = fs.params.mass;
    let dim = fs.grid().dim();
    let mut split_dev = 0.0_f64;
    let mut freq_dev = 0.0_f64;
    for i in fs.unmasked() {
        let p2: f64 = (0..dim).map(|a| fs.p.component(a)[i].powi(2)).sum();
        let terms = [p2 / (2.0 * m), fs.u.values()[i], fs.potential.values()[i]];
        let scale = terms.iter().map(|t| t.abs()).fold(1.0, f64::max);
        let e = fs.e.values()[i];
        split_dev = split_dev.max((e - terms.iter().sum::<f64>()).abs() / scale);
        freq_dev = freq_dev.max((fs.params.hbar * fs.omega.values()[i] - e).abs() / scale);
    }
    let mf = fs.masked_fraction();
    vec![
        Check::at_most("energy.decomposition", split_dev, 1e-8, &[], mf),
        Check::at_most("energy.frequency", freq_dev, 1e-12, &[], mf),
    ]
}

/// `U` from `-(ℏ²/2mR)∇²R` against `K_w + U_w`, relative to
/// `|U| + 10⁻³ max|U|`. Only meaningful for nodeless states.
pub fn bohm_split_consistency(psi: &ComplexField, fs: &FieldSet) -> Result<Check> {
    let u_amp = amplitude_quantum_potential(psi, &fs.params)?;
    let max_u = fs
        .unmasked()
        .map(|i| fs.u.values()[i].abs())
        .fold(0.0, f64::max);
    let eps = 1e-3 * max_u.max(f64::MIN_POSITIVE);
    let dev = fs
        .unmasked()
        .map(|i| {
            let a = u_amp.values()[i];
            let b = fs.k_w.values()[i] + fs.u_w.values()[i];
            (a - b).abs() / (a.abs() + eps)
        })
        .fold(0.0, f64::max);
    Ok(Check::at_most(
        "bohm_potential.split",
        dev,
        1e-8,
        &[max_u],
        fs.masked_fraction(),
    ))
}

/// Residual of a transport equation in L2 over the unmasked region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// `‖r‖ / ‖∂_t‖`.
    pub relative: f64,
    /// `‖r‖`.
    pub absolute: f64,
    /// `‖∂_t‖`, the norm of the time derivative.
    pub reference: f64,
    pub masked_fraction: f64,
}

impl Residual {
    /// Relative residual unless the state is stationary (`‖∂_t‖` below
    /// [`STATIONARY_FLOOR`]), in which case the absolute residual.
    pub fn measure(&self) -> f64 {
        if self.reference >= STATIONARY_FLOOR {
            self.relative
        } else {
            self.absolute
        }
    }

    /// Values: `[measure, relative, absolute, reference]`.
    pub fn check(&self, name: &str, tolerance: f64) -> Check {
        Check::at_most(
            name,
            self.measure(),
            tolerance,
            &[self.relative, self.absolute, self.reference],
            self.masked_fraction,
        )
    }

    fn from_sums(residual_sq: f64, reference_sq: f64, weight: f64, masked: f64) -> Self {
        let absolute = (residual_sq * weight).sqrt();
        let reference = (reference_sq * weight).sqrt();
        let relative = if reference > 0.0 {
            absolute / reference
        } else {
            0.0
        };
        Self {
            relative,
            absolute,
            reference,
            masked_fraction: masked,
        }
    }
}

fn check_trajectory(traj: &Trajectory, fieldsets: &[FieldSet]) -> Result<()> {
    if traj.snapshots.len() < 3 {
        return Err(Error::TooFewSnapshots {
            needed: 3,
            got: traj.snapshots.len(),
        });
    }
    if fieldsets.len() != traj.snapshots.len() {
        return Err(Error::TooFewSnapshots {
            needed: traj.snapshots.len(),
            got: fieldsets.len(),
        });
    }
    if !traj.is_uniform() {
        return Err(Error::NonUniformRecording);
    }
    Ok(())
}

fn joint_mask(a: &FieldSet, b: &FieldSet, c: &FieldSet) -> Vec<bool> {
    a.mask
        .iter()
        .zip(&b.mask)
        .zip(&c.mask)
        .map(|((a, b), c)| *a && *b && *c)
        .collect()
}

fn fraction_masked(mask: &[bool]) -> f64 {
    mask.iter().filter(|m| !**m).count() as f64 / mask.len() as f64
}

/// `∂w/∂t + (1/m)∇·(w p)` with a centered time difference over the
/// recorded snapshots.
pub fn continuity_residual(traj: &Trajectory, fieldsets: &[FieldSet]) -> Result<Residual> {
    check_trajectory(traj, fieldsets)?;
    let grid = traj.grid();
    let dim = grid.dim();
    let dt = traj.record_interval;
    let m = traj.params.mass;
    let (mut res_sq, mut ref_sq, mut masked) = (0.0, 0.0, 0.0);
    let interior = fieldsets.len() - 2;
    for n in 1..=interior {
        let (prev, cur, next) = (&fieldsets[n - 1], &fieldsets[n], &fieldsets[n + 1]);
        let mask = joint_mask(prev, cur, next);
        masked += fraction_masked(&mask);
        let w = cur.w.values();
        // current w·p, zero where p is undefined
        let current: Vec<Vec<f64>> = (0..dim)
            .map(|a| {
                cur.p
                    .component(a)
                    .iter()
                    .zip(w)
                    .map(|(p, w)| if p.is_finite() { p * w } else { 0.0 })
                    .collect()
            })
            .collect();
        let div = divergence(&VectorField::from_raw(grid, current))?;
        for i in 0..grid.len() {
            if !mask[i] {
                continue;
            }
            let dw = (next.w.values()[i] - prev.w.values()[i]) / (2.0 * dt);
            let r = dw + div.values()[i] / m;
            res_sq += r * r;
            ref_sq += dw * dw;
        }
    }
    Ok(Residual::from_sums(
        res_sq,
        ref_sq,
        grid.cell_volume() * dt,
        masked / interior as f64,
    ))
}

/// Transport residual with its force breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResidual {
    pub residual: Residual,
    /// The same residual with plain unweighted norms.
    pub unweighted: Residual,
    /// `‖rhs‖`, the norm of the assembled right-hand side.
    pub rhs: f64,
    /// `‖-(1/m)[(p·∇)p + (p_w·∇)p_w] + ∇K‖ / ‖∇K‖`: the kinetic terms
    /// against the gradient of the kinetic-energy field.
    pub kinetic_gradient_mismatch: f64,
    /// `‖(1/m)(p_w·∇)p_w‖`, the `∇K_w` force.
    pub osmotic_force: f64,
    /// `‖∇U_w‖`.
    pub quantum_force: f64,
    /// `‖∇V‖`.
    pub external_force: f64,
}

impl TransportResidual {
    pub fn checks(&self, tolerance: f64) -> Vec<Check> {
        vec![
            self.residual.check("transport.residual", tolerance),
            Check::at_most(
                "transport.rhs_norm_if_stationary",
                if self.residual.reference < STATIONARY_FLOOR {
                    self.rhs
                } else {
                    0.0
                },
                STATIONARY_FLOOR,
                &[self.rhs, self.residual.reference],
                self.residual.masked_fraction,
            ),
            Check::at_most(
                "transport.kinetic_gradient",
                self.kinetic_gradient_mismatch,
                VECTOR_IDENTITY_TOLERANCE,
                &[self.osmotic_force, self.quantum_force, self.external_force],
                self.residual.masked_fraction,
            ),
        ]
    }
}

/// `∂p/∂t = -(1/m)(p·∇)p - (1/m)(p_w·∇)p_w - ∇U_w - ∇V`, with `∂p/∂t` a
/// centered difference of the recorded momentum fields and the right-hand
/// side built from the middle snapshot.
///
/// Norms are density weighted, `‖f‖² = ∫|f|² w dr`: `p` is a
/// per-particle quantity whose round-off grows like `1/√w` towards the
/// mask boundary, and the weighted norm is its ensemble mean square.
pub fn transport_residual(
    traj: &Trajectory,
    fieldsets: &[FieldSet],
    potential: &Potential,
    mask_epsilon: f64,
) -> Result<TransportResidual> {
    check_trajectory(traj, fieldsets)?;
    let grid = traj.grid();
    let dim = grid.dim();
    let dt = traj.record_interval;
    let params = traj.params;
    let m = params.mass;
    let grad_v = potential.gradient(grid, &params)?;

    let (mut res_sq, mut ref_sq, mut masked) = (0.0, 0.0, 0.0);
    let (mut plain_res, mut plain_ref, mut rhs_sq) = (0.0, 0.0, 0.0);
    let (mut kin_mis, mut kin_ref) = (0.0, 0.0);
    let (mut f_osm, mut f_q, mut f_ext) = (0.0, 0.0, 0.0);
    let interior = fieldsets.len() - 2;
    for n in 1..=interior {
        let (prev, cur, next) = (&fieldsets[n - 1], &fieldsets[n], &fieldsets[n + 1]);
        let deriv = field_derivatives(&traj.snapshots[n].psi, &params, mask_epsilon)?;
        let mask: Vec<bool> = joint_mask(prev, cur, next)
            .iter()
            .zip(&deriv.mask)
            .map(|(a, b)| *a && *b)
            .collect();
        masked += fraction_masked(&mask);
        let w = cur.w.values();
        for i in 0..grid.len() {
            if !mask[i] {
                continue;
            }
            let p = cur.p.at(i);
            let pw = cur.p_w.at(i);
            for c in 0..dim {
                let dpdt = (next.p.component(c)[i] - prev.p.component(c)[i]) / (2.0 * dt);
                let convective: f64 = (0..dim).map(|j| p[j] * deriv.jac_p[c][j][i]).sum();
                let osmotic: f64 = (0..dim).map(|j| pw[j] * deriv.jac_p_w[c][j][i]).sum();
                let quantum = deriv.grad_u_w[c][i];
                let external = grad_v.component(c)[i];
                let rhs = -(convective + osmotic) / m - quantum - external;
                let r = dpdt - rhs;
                res_sq += r * r * w[i];
                ref_sq += dpdt * dpdt * w[i];
                rhs_sq += rhs * rhs * w[i];
                plain_res += r * r;
                plain_ref += dpdt * dpdt;

                // ∂_c K = (1/m) Σ_j (p_j ∂_c p_j + p_w,j ∂_c p_w,j)
                let grad_k: f64 = (0..dim)
                    .map(|j| p[j] * deriv.jac_p[j][c][i] + pw[j] * deriv.jac_p_w[j][c][i])
                    .sum::<f64>()
                    / m;
                let kinetic_terms = -(convective + osmotic) / m;
                kin_mis += (kinetic_terms + grad_k).powi(2) * w[i];
                kin_ref += grad_k * grad_k * w[i];
                f_osm += (osmotic / m).powi(2) * w[i];
                f_q += quantum * quantum * w[i];
                f_ext += external * external * w[i];
            }
        }
    }
    let weight = grid.cell_volume() * dt;
    let norm = |s: f64| (s * weight).sqrt();
    Ok(TransportResidual {
        residual: Residual::from_sums(res_sq, ref_sq, weight, masked / interior as f64),
        unweighted: Residual::from_sums(plain_res, plain_ref, weight, masked / interior as f64),
        rhs: norm(rhs_sq),
        kinetic_gradient_mismatch: if kin_ref > 0.0 {
            (kin_mis / kin_ref).sqrt()
        } else {
            0.0
        },
        osmotic_force: norm(f_osm),
        quantum_force: norm(f_q),
        external_force: norm(f_ext),
    })
}

/// Order of convergence from residuals at `Δt` and `Δt/2`.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// `v × (∇×v) = ½∇(v²) - (v·∇)v`, both sides assembled spectrally; 2D
/// fields are embedded with `v_z = 0`.
///
/// Values: `[relative L2 residual, ‖lhs‖, ‖½∇v²‖, ‖(v·∇)v‖]`. The residual
/// is relative to `‖½∇v²‖ + ‖(v·∇)v‖` and zero when both vanish.
pub fn vector_identity_residual(v: &VectorField) -> Result<Check> {
    let grid = v.grid();
    let dim = grid.dim();
    if dim == 1 {
        return Err(Error::Unsupported(
            "the curl identity needs two or three dimensions".into(),
        ));
    }
    let n = grid.len();
    // jac[i][j] = ∂_j v_i
    let jac: Vec<Vec<VectorField>> = (0..dim)
        .map(|i| {
            let g = ScalarField::new(grid, v.component(i).to_vec())?.gradient()?;
            Ok(vec![g])
        })
        .collect::<Result<_>>()?;
    let d = |i: usize, j: usize, pt: usize| jac[i][0].component(j)[pt];

    let speed_sq = ScalarField::new(grid, v.norm_squared())?;
    let grad_speed = speed_sq.gradient()?;

    let (mut res, mut lhs_n, mut half_n, mut conv_n) = (0.0, 0.0, 0.0, 0.0);
    for pt in 0..n {
        let vv = v.at(pt);
        let curl = if dim == 3 {
            [
                d(2, 1, pt) - d(1, 2, pt),
                d(0, 2, pt) - d(2, 0, pt),
                d(1, 0, pt) - d(0, 1, pt),
            ]
        } else {
            [0.0, 0.0, d(1, 0, pt) - d(0, 1, pt)]
        };
        let lhs = [
            vv[1] * curl[2] - vv[2] * curl[1],
            vv[2] * curl[0] - vv[0] * curl[2],
            vv[0] * curl[1] - vv[1] * curl[0],
        ];
        for c in 0..dim {
            let half = 0.5 * grad_speed.component(c)[pt];
            let conv: f64 = (0..dim).map(|j| vv[j] * d(c, j, pt)).sum();
            let r = lhs[c] - (half - conv);
            res += r * r;
            lhs_n += lhs[c] * lhs[c];
            half_n += half * half;
            conv_n += conv * conv;
        }
    }
    let dv = grid.cell_volume();
    let (res, lhs_n, half_n, conv_n) = (
        (res * dv).sqrt(),
        (lhs_n * dv).sqrt(),
        (half_n * dv).sqrt(),
        (conv_n * dv).sqrt(),
    );
    let scale = half_n + conv_n;
    let relative = if scale > 0.0 { res / scale } else { 0.0 };
    Ok(Check::at_most(
        "vector_identity",
        relative,
        VECTOR_IDENTITY_TOLERANCE,
        &[lhs_n, half_n, conv_n],
        0.0,
    ))
}

/// Seeded random periodic vector field whose Fourier modes are limited to
/// integer wavenumbers `|m_a| <= max_mode` per axis.
///
/// With `max_mode` below a quarter of the points per axis, products of two
/// such fields are still resolved exactly on the grid.
pub fn random_band_limited(grid: &Arc<Grid>, max_mode: usize, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mm = max_mode as i64;
    let mut modes = Vec::new();
    let ranges: Vec<Vec<i64>> = (0..3)
        .map(|a| {
            if a < dim {
                (-mm..=mm).collect()
            } else {
                vec![0]
            }
        })
        .collect();
    for &a in &ranges[0] {
        for &b in &ranges[1] {
            for &c in &ranges[2] {
                modes.push([a, b, c]);
            }
        }
    }
    let coefficients: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|_| {
            modes
                .iter()
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let components = (0..dim)
        .map(|comp| {
            (0..grid.len())
                .map(|pt| {
                    let r = grid.position(pt);
                    modes
                        .iter()
                        .zip(&coefficients[comp])
                        .map(|(m, (ca, cb))| {
                            let phase: f64 = (0..dim)
                                .map(|a| {
                                    2.0 * std::f64::consts::PI
                                        * m[a] as f64
                                        * (r[a] - grid.origin()[a])
                                        / grid.extent()[a]
                                })
                                .sum();
                            ca * phase.cos() + cb * phase.sin()
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    VectorField::from_raw(grid, components)
}

/// `min K >= -slack · e_scale` over the unmasked region.
///
/// Values: `[-min K / e_scale, min K]`.
pub fn kinetic_positivity(fs: &FieldSet, e_scale: f64) -> Check {
    let min_k = fs
        .unmasked()
        .map(|i| fs.k.values()[i])
        .fold(f64::INFINITY, f64::min);
    Check::at_most(
        "sign.K_nonnegative",
        -min_k / e_scale,
        KINETIC_SIGN_SLACK,
        &[min_k],
        fs.masked_fraction(),
    )
}

/// Sign properties in a classically forbidden region: `K` stays
/// non-negative while `K̃` turns negative on at least
/// [`NEGATIVE_K_TILDE_FRACTION`] of the unmasked points where `V > e_scale`.
///
/// The second check's values: `[fraction, negative count, forbidden
/// count, min K̃ in the region, max K in the region]`.
pub fn sign_checks(fs: &FieldSet, e_scale: f64) -> Result<Vec<Check>> {
    let forbidden: Vec<usize> = fs
        .unmasked()
        .filter(|&i| fs.potential.values()[i] > e_scale)
        .collect();
    if forbidden.is_empty() {
        return Err(Error::Unsupported(
            "no unmasked point lies in a classically forbidden region".into(),
        ));
    }
    let negative = forbidden
        .iter()
        .filter(|&&i| fs.k_tilde.values()[i] < 0.0)
        .count();
    let min_kt = forbidden
        .iter()
        .map(|&i| fs.k_tilde.values()[i])
        .fold(f64::INFINITY, f64::min);
    let max_k = forbidden
        .iter()
        .map(|&i| fs.k.values()[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let fraction = negative as f64 / forbidden.len() as f64;
    Ok(vec![
        kinetic_positivity(fs, e_scale),
        Check::at_least(
            "sign.K_tilde_negative_in_barrier",
            fraction,
            NEGATIVE_K_TILDE_FRACTION,
            &[negative as f64, forbidden.len() as f64, min_kt, max_k],
            fs.masked_fraction(),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve_record, EvolutionParams};
    use crate::fields::{extract_fields, extract_snapshot};
    use crate::grid::make_grid;
    use crate::states::{realize, StateSpec};
    use std::f64::consts::PI;

    fn fields_of(spec: &StateSpec, grid: &Arc<Grid>, v: &Potential) -> (ComplexField, FieldSet) {
        let psi = realize(spec, grid).unwrap();
        let fs = extract_fields(&psi, v, &spec.params, 1e-12).unwrap();
        (psi, fs)
    }

    #[test]
    fn born_plane_wave() {
        let g = make_grid(&[64], &[2.0 * PI], &[-PI]).unwrap();
        let (psi, fs) = fields_of(&StateSpec::plane_wave(&[2.0]), &g, &Potential::Free);
        let checks = born_consistency(&psi, &fs, &PhysicalParams::natural()).unwrap();
        let p = checks.iter().find(|c| c.name == "born.momentum.x").unwrap();
        assert!(p.passed);
        assert!((p.values[1] - 2.0).abs() < 1e-12 && (p.values[2] - 2.0).abs() < 1e-12);
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
    }

    #[test]
    fn born_gaussian_kinetic() {
        let g = make_grid(&[256], &[40.0], &[-20.0]).unwrap();
        let (psi, fs) = fields_of(
            &StateSpec::gaussian(&[0.0], &[0.0], &[1.0]),
            &g,
            &Potential::Free,
        );
        let checks = born_consistency(&psi, &fs, &PhysicalParams::natural()).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
        for name in ["born.kinetic.K", "born.kinetic.K_tilde"] {
            let c = checks.iter().find(|c| c.name == name).unwrap();
            assert!((c.values[1] - 0.125).abs() < 1e-12);
            assert!((c.values[2] - 0.125).abs() < 1e-10);
        }
    }

    #[test]
    fn born_vortex_angular_momentum() {
        let g = make_grid(&[128, 128], &[24.0, 24.0], &[-12.0, -12.0]).unwrap();
        let (psi, fs) = fields_of(&StateSpec::vortex2d([0.0, 0.0], 1.0), &g, &Potential::Free);
        let checks = born_consistency(&psi, &fs, &PhysicalParams::natural()).unwrap();
        let c = checks
            .iter()
            .find(|c| c.name == "born.angular_momentum.z")
            .unwrap();
        assert!(c.passed, "{c:?}");
        assert!((c.values[1] - 1.0).abs() < 1e-8);
        assert!((c.values[2] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_saturates_uncertainty() {
        let g = make_grid(&[512], &[60.0], &[-30.0]).unwrap();
        for (sigma, dx, dp) in [(1.0, 1.0, 0.25), (2.0, 4.0, 1.0 / 16.0)] {
            let (_, fs) = fields_of(
                &StateSpec::gaussian(&[0.0], &[0.0], &[sigma]),
                &g,
                &Potential::Free,
            );
            let u = uncertainty_moments(&fs)[0];
            assert!((u.position_variance - dx).abs() < 1e-9);
            assert!((u.momentum_variance - dp).abs() < 1e-9);
            assert!((u.product() - 0.25).abs() < 0.25e-6);
            assert!(uncertainty_products(&fs)[0].passed);
        }
    }

    #[test]
    fn kinetic_forms_agree() {
        // half-cell offset keeps the odd-state node off the grid
        let h = 40.0 / 256.0;
        let g = make_grid(&[256], &[40.0], &[-20.0 + 0.5 * h]).unwrap();
        for n in 0..4 {
            let (_, fs) = fields_of(
                &StateSpec::ho_eigenstate(&[n], 1.0),
                &g,
                &Potential::harmonic(1.0),
            );
            let ke = kinetic_equivalence(&fs);
            assert!(ke.iter().all(|c| c.passed), "n={n} {ke:#?}");
            assert!(two_field_identities(&fs).iter().all(|c| c.passed));
            let ef = energy_field_consistency(&fs);
            assert!(ef.iter().all(|c| c.passed), "n={n} {ef:#?}");
        }
    }

    #[test]
    fn bohm_split_on_nodeless_state() {
        let g = make_grid(&[512], &[40.0], &[-20.0]).unwrap();
        let (psi, fs) = fields_of(
            &StateSpec::gaussian(&[0.3], &[0.5], &[1.3]),
            &g,
            &Potential::Free,
        );
        let c = bohm_split_consistency(&psi, &fs).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn vector_identity_cases() {
        let g = make_grid(&[32, 32], &[2.0 * PI, 2.0 * PI], &[0.0, 0.0]).unwrap();
        let constant = VectorField::from_fn(&g, |_| [0.3, -1.2, 0.0]).unwrap();
        let c = vector_identity_residual(&constant).unwrap();
        assert!(
            c.passed && c.measure() == 0.0 || c.measure() < 1e-14,
            "{c:?}"
        );

        // gradient of a smooth periodic scalar: the curl side vanishes
        let phi =
            ScalarField::from_fn(&g, |r| (r[0]).sin() * (2.0 * r[1]).cos() + (r[1]).sin()).unwrap();
        let grad = phi.gradient().unwrap();
        let c = vector_identity_residual(&grad).unwrap();
        assert!(c.passed, "{c:?}");
        assert!(c.values[1] < 1e-12);

        let g3 = make_grid(&[16, 16, 16], &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        let v = random_band_limited(&g3, 3, 7);
        assert!(vector_identity_residual(&v).unwrap().passed);

        let g1 = make_grid(&[16], &[1.0], &[0.0]).unwrap();
        let v1 = random_band_limited(&g1, 2, 1);
        assert!(matches!(
            vector_identity_residual(&v1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn evanescent_signs() {
        let g = make_grid(&[512], &[60.0], &[-30.0]).unwrap();
        let (_, fs) = fields_of(&StateSpec::evanescent(0.0, 1.0), &g, &Potential::Free);
        for i in fs.unmasked() {
            let x = g.coordinate(0, i);
            if x.abs() > 8.0 && x.abs() < 12.0 {
                assert!((fs.k.values()[i] - 0.5).abs() < 1e-6);
                assert!((fs.k_tilde.values()[i] + 0.5).abs() < 1e-6);
            }
        }
        // free space offers no forbidden region
        assert!(matches!(sign_checks(&fs, 0.5), Err(Error::Unsupported(_))));
        assert!(kinetic_positivity(&fs, 0.5).passed);
    }

    #[test]
    fn stationary_and_uniform_residuals() {
        let g = make_grid(&[256], &[40.0], &[-20.0]).unwrap();
        let params = PhysicalParams::natural();
        let v = Potential::harmonic(1.0);
        let psi = realize(&StateSpec::ho_eigenstate(&[0], 1.0), &g).unwrap();
        let traj = evolve_record(&psi, &v, &EvolutionParams::new(1e-3, 100, 10, params)).unwrap();
        let fsets: Vec<_> = traj
            .snapshots
            .iter()
            .map(|s| extract_snapshot(s, &v, &params, 1e-12).unwrap())
            .collect();
        let c = continuity_residual(&traj, &fsets).unwrap();
        assert!(c.reference < STATIONARY_FLOOR);
        assert!(c.measure() < 1e-8, "{c:?}");
        let t = transport_residual(&traj, &fsets, &v, 1e-12).unwrap();
        assert!(t.residual.reference < STATIONARY_FLOOR, "{t:?}");
        assert!(t.rhs < 1e-6 && t.residual.measure() < 1e-6, "{t:?}");
        assert!(t.checks(1e-2).iter().all(|c| c.passed));

        let gp = make_grid(&[64], &[2.0 * PI], &[-PI]).unwrap();
        let psi = realize(&StateSpec::plane_wave(&[3.0]), &gp).unwrap();
        let traj = evolve_record(
            &psi,
            &Potential::Free,
            &EvolutionParams::new(1e-2, 40, 10, params),
        )
        .unwrap();
        let fsets: Vec<_> = traj
            .snapshots
            .iter()
            .map(|s| extract_snapshot(s, &Potential::Free, &params, 1e-12).unwrap())
            .collect();
        assert!(continuity_residual(&traj, &fsets).unwrap().measure() < 1e-10);
        let t = transport_residual(&traj, &fsets, &Potential::Free, 1e-12).unwrap();
        assert!(t.residual.measure() < 1e-10, "{t:?}");
    }

    #[test]
    fn too_few_snapshots() {
        let g = make_grid(&[32], &[10.0], &[-5.0]).unwrap();
        let params = PhysicalParams::natural();
        let psi = realize(&StateSpec::gaussian(&[0.0], &[0.0], &[1.0]), &g).unwrap();
        let traj = evolve_record(
            &psi,
            &Potential::Free,
            &EvolutionParams::new(0.01, 1, 1, params),
        )
        .unwrap();
        let fsets: Vec<_> = traj
            .snapshots
            .iter()
            .map(|s| extract_snapshot(s, &Potential::Free, &params, 1e-12).unwrap())
            .collect();
        assert!(matches!(
            continuity_residual(&traj, &fsets),
            Err(Error::TooFewSnapshots { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn report_json_schema() {
        let mut report = VerificationReport::new(None);
        report.push(Check::at_most("a", 0.5, 1.0, &[2.0], 0.1));
        report.push(Check::at_least("b", 0.0, 1.0, &[], 0.0));
        assert!(!report.all_passed());
        let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        let first = &value["checks"][0];
        for key in ["name", "values", "tolerance", "passed", "masked_fraction"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(first["values"], serde_json::json!([0.5, 2.0]));
    }
}
