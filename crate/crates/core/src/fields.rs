//! Observable fields of a single wave-function snapshot.
//!
//! Writing `ψ = √w e^{iS/ℏ}`, every field here is built from `w` and the
//! derivatives of `S`; the phase itself is never reconstructed. All
//! derivatives come from one spectrum of `ψ` (never of `w` or `S`), so the
//! wrapped phase at vortices and the non-periodic growth of `∇w/w` in the
//! tails never enter a Fourier transform:
//!
//! ```text
//! p   = ℏ Im(ψ*∇ψ)/w          p_w = (ℏ/2)∇w/w = ℏ Re(ψ*∇ψ)/w
//! ∇²w = 2 Re(ψ*∇²ψ) + 2|∇ψ|²  U_w = -(ℏ²/4m) ∇²w/w
//! E   = Re(ψ* Ĥψ)/w
//! ```
//!
//! Points with `w <= mask_epsilon · max(w)` are masked; every field except
//! `w` and `V` holds `NaN` there.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::{Potential, Snapshot};
use crate::grid::{ComplexField, Grid, ScalarField, Spectrum, VectorField};
use crate::states::PhysicalParams;

pub const DEFAULT_MASK_EPSILON: f64 = 1e-12;

/// Tolerated deviation of `∫|ψ|²` from one on input.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Angular momentum field `M = r × p`; only `M_z` exists in 2D and nothing
/// in 1D.
#[derive(Debug, Clone)]
pub enum AngularMomentum {
    Absent,
    Z(ScalarField),
    Vector(VectorField),
}

/// Complete set of observable fields of one snapshot.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub time: f64,
    pub params: PhysicalParams,
    /// Probability density. Defined everywhere.
    pub w: ScalarField,
    /// Momentum field ∇S.
    pub p: VectorField,
    /// Osmotic momentum (ℏ/2)∇w/w.
    pub p_w: VectorField,
    pub k_w: ScalarField,
    pub u_w: ScalarField,
    /// Bohm potential `K_w + U_w`.
    pub u: ScalarField,
    /// Kinetic-energy field `p²/2m + K_w`, non-negative.
    pub k: ScalarField,
    /// `K + U_w`, which may be negative.
    pub k_tilde: ScalarField,
    pub e: ScalarField,
    pub omega: ScalarField,
    pub k_wave: VectorField,
    pub angular: AngularMomentum,
    /// `p - p_w`.
    pub p1: VectorField,
    /// `p + p_w`.
    pub p2: VectorField,
    /// External potential, defined everywhere.
    pub potential: ScalarField,
    pub mask: Vec<bool>,
}

/// Primitive per-point inputs from which a [`FieldSet`] is assembled.
#[derive(Debug, Clone)]
pub(crate) struct RawFields {
    pub w: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub p_w: Vec<Vec<f64>>,
    pub u_w: Vec<f64>,
    /// Energy field if computed independently; otherwise `p²/2m + U + V`.
    pub energy: Option<Vec<f64>>,
    pub potential: Vec<f64>,
    pub mask: Vec<bool>,
}

impl FieldSet {
    pub(crate) fn assemble(
        raw: RawFields,
        grid: &Arc<Grid>,
        params: PhysicalParams,
        time: f64,
    ) -> Self {
        let n = grid.len();
        let dim = grid.dim();
        let PhysicalParams { hbar, mass } = params;
        let nan = f64::NAN;

        let mut p = raw.p;
        let mut p_w = raw.p_w;
        let mut k_w = vec![nan; n];
        let mut u_w = raw.u_w;
        let mut u = vec![nan; n];
        let mut k = vec![nan; n];
        let mut k_tilde = vec![nan; n];
        let mut e = raw.energy.unwrap_or_else(|| vec![nan; n]);
        let computed_energy = e.iter().all(|v| v.is_nan());
        let mut omega = vec![nan; n];
        let mut k_wave = vec![vec![nan; n]; dim];
        let mut p1 = vec![vec![nan; n]; dim];
        let mut p2 = vec![vec![nan; n]; dim];
        let mut m: Vec<Vec<f64>> = match dim {
            2 => vec![vec![nan; n]],
            3 => vec![vec![nan; n]; 3],
            _ => Vec::new(),
        };

        for i in 0..n {
            if !raw.mask[i] {
                for a in 0..dim {
                    p[a][i] = nan;
                    p_w[a][i] = nan;
                }
                u_w[i] = nan;
                e[i] = nan;
                continue;
            }
            let p2_sum: f64 = (0..dim).map(|a| p[a][i] * p[a][i]).sum();
            let pw2_sum: f64 = (0..dim).map(|a| p_w[a][i] * p_w[a][i]).sum();
            k_w[i] = pw2_sum / (2.0 * mass);
            u[i] = k_w[i] + u_w[i];
            k[i] = p2_sum / (2.0 * mass) + k_w[i];
            k_tilde[i] = k[i] + u_w[i];
            if computed_energy {
                e[i] = p2_sum / (2.0 * mass) + u[i] + raw.potential[i];
            }
            omega[i] = e[i] / hbar;
            for a in 0..dim {
                k_wave[a][i] = p[a][i] / hbar;
                p1[a][i] = p[a][i] - p_w[a][i];
                p2[a][i] = p[a][i] + p_w[a][i];
            }
            let r = grid.position(i);
            match dim {
                2 => m[0][i] = r[0] * p[1][i] - r[1] * p[0][i],
                3 => {
                    m[0][i] = r[1] * p[2][i] - r[2] * p[1][i];
                    m[1][i] = r[2] * p[0][i] - r[0] * p[2][i];
                    m[2][i] = r[0] * p[1][i] - r[1] * p[0][i];
                }
                _ => {}
            }
        }

        let angular = match dim {
            2 => AngularMomentum::Z(ScalarField::from_raw(grid, m.pop().unwrap())),
            3 => AngularMomentum::Vector(VectorField::from_raw(grid, m)),
            _ => AngularMomentum::Absent,
        };

        let scalar = |v: Vec<f64>| ScalarField::from_raw(grid, v);
        let vector = |v: Vec<Vec<f64>>| VectorField::from_raw(grid, v);
        Self {
            time,
            params,
            w: scalar(raw.w),
            p: vector(p),
            p_w: vector(p_w),
            k_w: scalar(k_w),
            u_w: scalar(u_w),
            u: scalar(u),
            k: scalar(k),
            k_tilde: scalar(k_tilde),
            e: scalar(e),
            omega: scalar(omega),
            k_wave: vector(k_wave),
            angular,
            p1: vector(p1),
            p2: vector(p2),
            potential: scalar(raw.potential),
            mask: raw.mask,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.w.grid()
    }

    pub fn masked_fraction(&self) -> f64 {
        let masked = self.mask.iter().filter(|m| !**m).count();
        masked as f64 / self.mask.len() as f64
    }

    pub fn unmasked(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i)
    }

    /// `∫ f w dr` over the unmasked region.
    pub fn average(&self, f: &[f64]) -> f64 {
        let w = self.w.values();
        self.unmasked().map(|i| f[i] * w[i]).sum::<f64>() * self.grid().cell_volume()
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Column names of [`FieldSet::write_csv`].
    pub fn csv_header(&self) -> Vec<String> {
        let dim = self.grid().dim();
        let axes = ["x", "y", "z"];
        let vector = |prefix: &str| -> Vec<String> {
            axes[..dim].iter().map(|a| format!("{prefix}{a}")).collect()
        };
        let mut cols = vec!["t".to_string()];
        cols.extend(axes[..dim].iter().map(|a| a.to_string()));
        cols.push("w".into());
        cols.extend(vector("p"));
        cols.extend(vector("pw"));
        for name in ["Kw", "Uw", "U", "K", "Ktilde", "E", "omega"] {
            cols.push(name.into());
        }
        match &self.angular {
            AngularMomentum::Absent => {}
            AngularMomentum::Z(_) => cols.push("Mz".into()),
            AngularMomentum::Vector(_) => cols.extend(vector("M")),
        }
        cols.extend(vector("p1"));
        cols.extend(vector("p2"));
        cols.push("masked".into());
        cols
    }

    /// One row per grid point in flat order; reals with 17 significant
    /// digits, masked fields as `NaN`, `masked` as 0 or 1.
    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.csv_header().join(","))?;
        let grid = self.grid();
        let dim = grid.dim();
        let mut row = String::new();
        for i in 0..grid.len() {
            use std::fmt::Write as _;
            row.clear();
            let mut push = |v: f64| {
                let _ = write!(row, "{v:.16e},");
            };
            push(self.time);
            let r = grid.position(i);
            r[..dim].iter().for_each(|x| push(*x));
            push(self.w.values()[i]);
            for v in [&self.p, &self.p_w] {
                v.components().iter().for_each(|c| push(c[i]));
            }
            for f in [
                &self.k_w,
                &self.u_w,
                &self.u,
                &self.k,
                &self.k_tilde,
                &self.e,
                &self.omega,
            ] {
                push(f.values()[i]);
            }
            match &self.angular {
                AngularMomentum::Absent => {}
                AngularMomentum::Z(m) => push(m.values()[i]),
                AngularMomentum::Vector(m) => m.components().iter().for_each(|c| push(c[i])),
            }
            for v in [&self.p1, &self.p2] {
                v.components().iter().for_each(|c| push(c[i]));
            }
            let _ = write!(row, "{}", u8::from(!self.mask[i]));
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

fn validate_inputs(psi: &ComplexField, mask_epsilon: f64) -> Result<()> {
    if !(mask_epsilon > 0.0 && mask_epsilon < 1.0) {
        return Err(Error::InvalidState(format!(
            "mask_epsilon must lie in (0, 1) (got {mask_epsilon})"
        )));
    }
    if !psi.is_finite() {
        return Err(Error::NonFinite("wave function".into()));
    }
    let norm = psi.norm_squared();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Unnormalized { norm });
    }
    Ok(())
}

fn density_mask(w: &[f64], mask_epsilon: f64) -> Result<Vec<bool>> {
    let max = w.iter().fold(0.0_f64, |m, &v| m.max(v));
    let threshold = mask_epsilon * max;
    let mask: Vec<bool> = w.iter().map(|&v| v > threshold).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    Ok(mask)
}

/// Extracts every observable field of `psi` (taken at `t = 0`; see
/// [`extract_snapshot`] for recorded states).
pub fn extract_fields(
    psi: &ComplexField,
    potential: &Potential,
    params: &PhysicalParams,
    mask_epsilon: f64,
) -> Result<FieldSet> {
    params.validate()?;
    validate_inputs(psi, mask_epsilon)?;
    let grid = psi.grid();
    let n = grid.len();
    let dim = grid.dim();
    let PhysicalParams { hbar, mass } = *params;

    let spectrum = Spectrum::of_complex(psi)?;
    let grad: Vec<Vec<Complex64>> = (0..dim).map(|a| spectrum.gradient_component(a)).collect();
    let lap = spectrum.laplacian();
    let v = potential.sample(grid, params)?;

    let w: Vec<f64> = psi.values().iter().map(|z| z.norm_sqr()).collect();
    let mask = density_mask(&w, mask_epsilon)?;

    let mut p = vec![vec![0.0; n]; dim];
    let mut p_w = vec![vec![0.0; n]; dim];
    let mut u_w = vec![0.0; n];
    let mut energy = vec![0.0; n];
    let kinetic = hbar * hbar / (2.0 * mass);
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        let inv_w = 1.0 / w[i];
        let conj = psi.values()[i].conj();
        let mut grad_sq = 0.0;
        for a in 0..dim {
            let z = conj * grad[a][i];
            p[a][i] = hbar * z.im * inv_w;
            p_w[a][i] = hbar * z.re * inv_w;
            grad_sq += grad[a][i].norm_sqr();
        }
        let psi_lap = (conj * lap[i]).re;
        let lap_w = 2.0 * psi_lap + 2.0 * grad_sq;
        u_w[i] = -hbar * hbar / (4.0 * mass) * lap_w * inv_w;
        energy[i] = (-kinetic * psi_lap + v.values()[i] * w[i]) * inv_w;
    }

    Ok(FieldSet::assemble(
        RawFields {
            w,
            p,
            p_w,
            u_w,
            energy: Some(energy),
            potential: v.into_values(),
            mask,
        },
        grid,
        *params,
        0.0,
    ))
}

pub fn extract_snapshot(
    snapshot: &Snapshot,
    potential: &Potential,
    params: &PhysicalParams,
    mask_epsilon: f64,
) -> Result<FieldSet> {
    Ok(extract_fields(&snapshot.psi, potential, params, mask_epsilon)?.with_time(snapshot.time))
}

/// Bohm potential through the amplitude, `U = -(ℏ²/2mR)∇²R` with `R = |ψ|`.
///
/// This takes the spectral Laplacian of `R` itself and is only accurate for
/// nodeless states, where `R` is smooth. `NaN` where `R = 0`.
pub fn amplitude_quantum_potential(
    psi: &ComplexField,
    params: &PhysicalParams,
) -> Result<ScalarField> {
    let grid = psi.grid();
    let r: Vec<f64> = psi.values().iter().map(|z| z.norm()).collect();
    let lap = Spectrum::of_values(grid, &r)?.laplacian();
    let factor = -params.hbar * params.hbar / (2.0 * params.mass);
    let values = r
        .iter()
        .zip(&lap)
        .map(|(&r, l)| if r > 0.0 { factor * l.re / r } else { f64::NAN })
        .collect();
    Ok(ScalarField::from_raw(grid, values))
}

/// Center-of-mass / relative split of the two-value momentum model.
#[derive(Debug, Clone)]
pub struct KoenigDecomposition {
    /// `p/m`.
    pub v_cm: VectorField,
    /// `p_w/m`.
    pub v_rel: VectorField,
    /// Mass of each constituent, `m/2`.
    pub mu: f64,
    /// Total mass, `m`.
    pub total_mass: f64,
}

pub fn koenig_decompose(fs: &FieldSet) -> KoenigDecomposition {
    let m = fs.params.mass;
    let scale = |v: &VectorField| {
        VectorField::from_raw(
            fs.grid(),
            v.components()
                .iter()
                .map(|c| c.iter().map(|x| x / m).collect())
                .collect(),
        )
    };
    KoenigDecomposition {
        v_cm: scale(&fs.p),
        v_rel: scale(&fs.p_w),
        mu: 0.5 * m,
        total_mass: m,
    }
}

impl KoenigDecomposition {
    /// Constituent velocities `v₁ = V_cm - V`, `v₂ = V_cm + V`.
    pub fn velocities(&self) -> (VectorField, VectorField) {
        let combine = |sign: f64| {
            VectorField::from_raw(
                self.v_cm.grid(),
                self.v_cm
                    .components()
                    .iter()
                    .zip(self.v_rel.components())
                    .map(|(c, r)| c.iter().zip(r).map(|(c, r)| c + sign * r).collect())
                    .collect(),
            )
        };
        (combine(-1.0), combine(1.0))
    }

    /// `μv₁ + μv₂` per axis.
    pub fn momentum_sum(&self) -> VectorField {
        let (v1, v2) = self.velocities();
        VectorField::from_raw(
            v1.grid(),
            v1.components()
                .iter()
                .zip(v2.components())
                .map(|(a, b)| a.iter().zip(b).map(|(a, b)| self.mu * (a + b)).collect())
                .collect(),
        )
    }

    /// `μv₁²/2 + μv₂²/2`.
    pub fn kinetic_energy(&self) -> ScalarField {
        let (v1, v2) = self.velocities();
        let values = v1
            .norm_squared()
            .iter()
            .zip(v2.norm_squared())
            .map(|(a, b)| 0.5 * self.mu * (a + b))
            .collect();
        ScalarField::from_raw(v1.grid(), values)
    }
}

/// Spatial derivatives of `p`, `p_w` and `U_w`, obtained from derivatives
/// of `ψ` up to third order by the product rule.
#[derive(Debug, Clone)]
pub struct FieldDerivatives {
    /// `jac_p[i][j][n] = ∂_j p_i` at point `n`.
    pub jac_p: Vec<Vec<Vec<f64>>>,
    pub jac_p_w: Vec<Vec<Vec<f64>>>,
    /// `grad_u_w[j][n] = ∂_j U_w`.
    pub grad_u_w: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
}

fn unit_orders(dim: usize, axes: &[usize]) -> Vec<u32> {
    let mut orders = vec![0u32; dim];
    for &a in axes {
        orders[a] += 1;
    }
    orders
}

pub fn field_derivatives(
    psi: &ComplexField,
    params: &PhysicalParams,
    mask_epsilon: f64,
) -> Result<FieldDerivatives> {
    params.validate()?;
    validate_inputs(psi, mask_epsilon)?;
    let grid = psi.grid();
    let n = grid.len();
    let dim = grid.dim();
    let PhysicalParams { hbar, mass } = *params;

    let spectrum = Spectrum::of_complex(psi)?;
    let d1: Vec<Vec<Complex64>> = (0..dim).map(|a| spectrum.gradient_component(a)).collect();
    let mut d2 = vec![vec![Vec::new(); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let d = spectrum.derivative(&unit_orders(dim, &[i, j]));
            d2[j][i] = d.clone();
            d2[i][j] = d;
        }
    }
    let lap = spectrum.laplacian();
    // ∂_j ∇²ψ
    let d_lap: Vec<Vec<Complex64>> = (0..dim)
        .map(|j| {
            let mut total = vec![Complex64::default(); n];
            for i in 0..dim {
                let d = spectrum.derivative(&unit_orders(dim, &[j, i, i]));
                for (t, d) in total.iter_mut().zip(d) {
                    *t += d;
                }
            }
            total
        })
        .collect();

    let w: Vec<f64> = psi.values().iter().map(|z| z.norm_sqr()).collect();
    let mask = density_mask(&w, mask_epsilon)?;

    let nan = f64::NAN;
    let mut jac_p = vec![vec![vec![nan; n]; dim]; dim];
    let mut jac_p_w = vec![vec![vec![nan; n]; dim]; dim];
    let mut grad_u_w = vec![vec![nan; n]; dim];
    for pt in 0..n {
        if !mask[pt] {
            continue;
        }
        let psi_c = psi.values()[pt].conj();
        let inv_w = 1.0 / w[pt];
        let p: Vec<f64> = (0..dim)
            .map(|a| hbar * (psi_c * d1[a][pt]).im * inv_w)
            .collect();
        let p_w: Vec<f64> = (0..dim)
            .map(|a| hbar * (psi_c * d1[a][pt]).re * inv_w)
            .collect();
        // ∂_j w / w
        let log_grad: Vec<f64> = p_w.iter().map(|v| 2.0 * v / hbar).collect();
        let grad_sq: f64 = (0..dim).map(|a| d1[a][pt].norm_sqr()).sum();
        let lap_w = 2.0 * (psi_c * lap[pt]).re + 2.0 * grad_sq;
        for j in 0..dim {
            for i in 0..dim {
                let z = d1[j][pt].conj() * d1[i][pt] + psi_c * d2[i][j][pt];
                jac_p[i][j][pt] = hbar * z.im * inv_w - p[i] * log_grad[j];
                jac_p_w[i][j][pt] = hbar * z.re * inv_w - p_w[i] * log_grad[j];
            }
            let cross: f64 = (0..dim).map(|i| (d2[i][j][pt].conj() * d1[i][pt]).re).sum();
            let d_lap_w =
                2.0 * (d1[j][pt].conj() * lap[pt] + psi_c * d_lap[j][pt]).re + 4.0 * cross;
            grad_u_w[j][pt] = -hbar * hbar / (4.0 * mass) * (d_lap_w - lap_w * log_grad[j]) * inv_w;
        }
    }
    Ok(FieldDerivatives {
        jac_p,
        jac_p_w,
        grad_u_w,
        mask,
    })
}
