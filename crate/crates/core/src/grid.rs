//! Uniform periodic grids and Fourier-spectral calculus.
//!
//! Every field is stored as a flat row-major array with axis 0 varying
//! slowest. Wavenumbers follow the usual FFT ordering
//! `k_j = 2π j / L` for `j < n/2` and `2π (j - n) / L` otherwise; for odd
//! derivative orders the Nyquist coefficient is dropped so that real fields
//! stay real.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MIN_POINTS_PER_AXIS: usize = 8;

/// Uniform periodic lattice over one to three spatial dimensions.
#[derive(Clone)]
pub struct Grid {
    shape: Vec<usize>,
    extent: Vec<f64>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    wavenumbers: Vec<Vec<f64>>,
    odd_wavenumbers: Vec<Vec<f64>>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("shape", &self.shape)
            .field("extent", &self.extent)
            .field("origin", &self.origin)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.extent == other.extent && self.origin == other.origin
    }
}

impl Grid {
    pub fn new(points: &[usize], extent: &[f64], origin: &[f64]) -> Result<Self> {
        let dim = points.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3 (got {dim})"
            )));
        }
        if extent.len() != dim || origin.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extents and origins, got {} and {}",
                extent.len(),
                origin.len()
            )));
        }
        for axis in 0..dim {
            if points[axis] < MIN_POINTS_PER_AXIS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} points, need at least {MIN_POINTS_PER_AXIS}",
                    points[axis]
                )));
            }
            if !(extent[axis].is_finite() && extent[axis] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} extent must be positive (got {})",
                    extent[axis]
                )));
            }
            if !origin[axis].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} origin is not finite"
                )));
            }
        }

        let mut planner = FftPlanner::new();
        let mut wavenumbers = Vec::with_capacity(dim);
        let mut odd_wavenumbers = Vec::with_capacity(dim);
        let mut forward = Vec::with_capacity(dim);
        let mut inverse = Vec::with_capacity(dim);
        for axis in 0..dim {
            let n = points[axis];
            let base = 2.0 * PI / extent[axis];
            let k: Vec<f64> = (0..n)
                .map(|j| {
                    let j = j as i64;
                    let n = n as i64;
                    let m = if j < (n + 1) / 2 { j } else { j - n };
                    base * m as f64
                })
                .collect();
            let mut k_odd = k.clone();
            if n.is_multiple_of(2) {
                k_odd[n / 2] = 0.0;
            }
            wavenumbers.push(k);
            odd_wavenumbers.push(k_odd);
            forward.push(planner.plan_fft_forward(n));
            inverse.push(planner.plan_fft_inverse(n));
        }

        Ok(Self {
            shape: points.to_vec(),
            extent: extent.to_vec(),
            origin: origin.to_vec(),
            spacing: (0..dim).map(|a| extent[a] / points[a] as f64).collect(),
            wavenumbers,
            odd_wavenumbers,
            forward,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Wavenumber table of one axis in FFT order (used for even derivatives).
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Largest |k|² on the lattice.
    pub fn k_squared_max(&self) -> f64 {
        self.wavenumbers
            .iter()
            .map(|k| k.iter().fold(0.0_f64, |m, &v| m.max(v * v)))
            .sum()
    }

    /// Coordinate of lattice index `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis])
            .map(|i| self.coordinate(axis, i))
            .collect()
    }

    /// Per-axis lattice indices of a flat index. Unused axes are zero.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Physical position of a flat index. Unused axes are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut r = [0.0; 3];
        for axis in 0..self.dim() {
            r[axis] = self.coordinate(axis, idx[axis]);
        }
        r
    }

    /// Forward multi-dimensional FFT in place (unnormalized).
    pub fn forward_fft(&self, data: &mut [Complex64]) {
        for axis in 0..self.dim() {
            self.transform_axis(data, axis, &self.forward[axis]);
        }
    }

    /// Inverse multi-dimensional FFT in place, normalized by 1/N.
    pub fn inverse_fft(&self, data: &mut [Complex64]) {
        for axis in 0..self.dim() {
            self.transform_axis(data, axis, &self.inverse[axis]);
        }
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.shape[axis];
        let stride: usize = self.shape[axis + 1..].iter().product();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        if stride == 1 {
            for line in data.chunks_exact_mut(n) {
                fft.process_with_scratch(line, &mut scratch);
            }
            return;
        }
        let outer = self.len() / (n * stride);
        let mut line = vec![Complex64::default(); n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }

    fn check_compatible(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Builds a grid. Thin wrapper over [`Grid::new`] returning a shareable handle.
pub fn make_grid(points: &[usize], extent: &[f64], origin: &[f64]) -> Result<Arc<Grid>> {
    Grid::new(points, extent, origin).map(Arc::new)
}

pub(crate) fn ensure_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    a.check_compatible(b)
}

fn ensure_finite_real(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn ensure_finite_complex(values: &[Complex64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Real scalar samples over a grid.
///
/// Values produced by [`crate::fields::extract_fields`] carry `NaN` at masked
/// points; everything built through [`ScalarField::new`] is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        ensure_finite_real(&values, "scalar field")?;
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// `dim` real components over a grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: &Arc<Grid>, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::InvalidGrid(format!(
                "vector field has {} components on a {}-dimensional grid",
                components.len(),
                grid.dim()
            )));
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(Error::InvalidGrid("component length mismatch".into()));
            }
            ensure_finite_real(c, "vector field")?;
        }
        Ok(Self {
            grid: Arc::clone(grid),
            components,
        })
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, components: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(components.len(), grid.dim());
        Self {
            grid: Arc::clone(grid),
            components,
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Result<Self> {
        let mut components = vec![Vec::with_capacity(grid.len()); grid.dim()];
        for i in 0..grid.len() {
            let v = f(&grid.position(i));
            for (axis, c) in components.iter_mut().enumerate() {
                c.push(v[axis]);
            }
        }
        Self::new(grid, components)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Components at one point, zero-padded to three.
    pub fn at(&self, flat: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (axis, c) in self.components.iter().enumerate() {
            v[axis] = c[flat];
        }
        v
    }

    pub fn norm_squared(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }
}

/// Complex samples over a grid, typically a wave function.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        ensure_finite_complex(&values, "complex field")?;
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64; 3]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::from_raw(grid, vec![Complex64::default(); grid.len()])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn density(&self) -> ScalarField {
        ScalarField::from_raw(
            &self.grid,
            self.values.iter().map(|v| v.norm_sqr()).collect(),
        )
    }

    /// ∫|ψ|² dr.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// ⟨self|other⟩ = ∫ self* other dr.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values.iter_mut() {
            *v *= factor;
        }
    }
}

/// Fourier coefficients of a field, reused for several derivatives.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn of_complex(f: &ComplexField) -> Result<Self> {
        ensure_finite_complex(&f.values, "complex field")?;
        let mut coeffs = f.values.clone();
        f.grid.forward_fft(&mut coeffs);
        Ok(Self {
            grid: Arc::clone(&f.grid),
            coeffs,
        })
    }

    pub fn of_real(f: &ScalarField) -> Result<Self> {
        Self::of_values(&f.grid, &f.values)
    }

    pub(crate) fn of_values(grid: &Arc<Grid>, values: &[f64]) -> Result<Self> {
        ensure_finite_real(values, "scalar field")?;
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward_fft(&mut coeffs);
        Ok(Self {
            grid: Arc::clone(grid),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Mixed partial derivative `∂^orders` back in position space.
    /// `orders[a]` is the derivative order along axis `a`.
    pub fn derivative(&self, orders: &[u32]) -> Vec<Complex64> {
        let grid = &self.grid;
        let dim = grid.dim();
        // Per-axis multiplier tables (i k)^order.
        let tables: Vec<Vec<Complex64>> = (0..dim)
            .map(|axis| {
                let order = orders.get(axis).copied().unwrap_or(0);
                let k = if order % 2 == 1 {
                    &grid.odd_wavenumbers[axis]
                } else {
                    &grid.wavenumbers[axis]
                };
                k.iter()
                    .map(|&k| Complex64::new(0.0, k).powu(order))
                    .collect()
            })
            .collect();
        self.apply(|idx| {
            let mut m = Complex64::new(1.0, 0.0);
            for axis in 0..dim {
                m *= tables[axis][idx[axis]];
            }
            m
        })
    }

    pub fn gradient_component(&self, axis: usize) -> Vec<Complex64> {
        let mut orders = [0u32; 3];
        orders[axis] = 1;
        self.derivative(&orders[..self.grid.dim()])
    }

    pub fn laplacian(&self) -> Vec<Complex64> {
        let grid = &self.grid;
        let dim = grid.dim();
        self.apply(|idx| {
            let k2: f64 = (0..dim)
                .map(|axis| grid.wavenumbers[axis][idx[axis]].powi(2))
                .sum();
            Complex64::new(-k2, 0.0)
        })
    }

    fn apply(&self, multiplier: impl Fn(&[usize; 3]) -> Complex64) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, c)| c * multiplier(&self.grid.unflatten(flat)))
            .collect();
        self.grid.inverse_fft(&mut out);
        out
    }
}

/// Spectral differentiation on periodic grids.
pub trait Spectral: Sized {
    type Gradient;

    fn gradient(&self) -> Result<Self::Gradient>;
    fn laplacian(&self) -> Result<Self>;
}

impl Spectral for ScalarField {
    type Gradient = VectorField;

    fn gradient(&self) -> Result<VectorField> {
        let spectrum = Spectrum::of_real(self)?;
        let components = (0..self.grid.dim())
            .map(|axis| real_part(spectrum.gradient_component(axis)))
            .collect();
        Ok(VectorField::from_raw(&self.grid, components))
    }

    fn laplacian(&self) -> Result<ScalarField> {
        let spectrum = Spectrum::of_real(self)?;
        Ok(ScalarField::from_raw(
            &self.grid,
            real_part(spectrum.laplacian()),
        ))
    }
}

impl Spectral for ComplexField {
    type Gradient = Vec<ComplexField>;

    fn gradient(&self) -> Result<Vec<ComplexField>> {
        let spectrum = Spectrum::of_complex(self)?;
        Ok((0..self.grid.dim())
            .map(|axis| ComplexField::from_raw(&self.grid, spectrum.gradient_component(axis)))
            .collect())
    }

    fn laplacian(&self) -> Result<ComplexField> {
        let spectrum = Spectrum::of_complex(self)?;
        Ok(ComplexField::from_raw(&self.grid, spectrum.laplacian()))
    }
}

fn real_part(values: Vec<Complex64>) -> Vec<f64> {
    values.into_iter().map(|v| v.re).collect()
}

pub fn gradient<F: Spectral>(f: &F) -> Result<F::Gradient> {
    f.gradient()
}

pub fn laplacian<F: Spectral>(f: &F) -> Result<F> {
    f.laplacian()
}

/// Spectral ∇·v.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let grid = &v.grid;
    let mut total = vec![0.0; grid.len()];
    for (axis, component) in v.components.iter().enumerate() {
        let d = Spectrum::of_values(grid, component)?.gradient_component(axis);
        for (t, d) in total.iter_mut().zip(d) {
            *t += d.re;
        }
    }
    Ok(ScalarField::from_raw(grid, total))
}

/// Uniform-weight quadrature `Σ f · ∏h`, exact for band-limited periodic data.
pub fn integrate(f: &ScalarField) -> Result<f64> {
    ensure_finite_real(&f.values, "integrand")?;
    Ok(f.values.iter().sum::<f64>() * f.grid.cell_volume())
}
