//! Flow lines of the velocity fields `p/m`, `p₁/m` and `p₂/m` through a
//! recorded evolution.
//!
//! Velocities are sampled on the grid at each snapshot, interpolated with
//! periodic cubic Lagrange stencils in space and linearly in time, and
//! integrated with RK4. Positions are reported unwrapped.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::fields::{extract_snapshot, FieldSet, DEFAULT_MASK_EPSILON};
use crate::grid::Grid;
use crate::verify::Check;

/// Name of the spatial interpolation scheme, reported in output metadata.
pub const INTERPOLATION: &str = "cubic-lagrange";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldChoice {
    /// `p/m`
    Cm,
    /// `(p - p_w)/m`
    P1,
    /// `(p + p_w)/m`
    P2,
}

impl FieldChoice {
    pub fn name(self) -> &'static str {
        match self {
            FieldChoice::Cm => "cm",
            FieldChoice::P1 => "p1",
            FieldChoice::P2 => "p2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFlag {
    Ok,
    /// The seed itself sits in the masked region.
    SeedMasked,
    /// The path reached a masked stencil and was truncated.
    Truncated,
}

impl PathFlag {
    pub fn name(self) -> &'static str {
        match self {
            PathFlag::Ok => "ok",
            PathFlag::SeedMasked => "seed_masked",
            PathFlag::Truncated => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    /// Snapshot times reached by the path.
    pub times: Vec<f64>,
    /// Unwrapped positions at `times`; unused axes are zero.
    pub positions: Vec<[f64; 3]>,
    /// Boundary crossings per axis at the last position.
    pub wraps: [i64; 3],
    pub flag: PathFlag,
}

impl FlowPath {
    pub fn end(&self) -> [f64; 3] {
        *self.positions.last().expect("paths hold their seed")
    }
}

#[derive(Debug, Clone)]
pub struct FlowLineSet {
    pub seeds: Vec<[f64; 3]>,
    pub field_choice: FieldChoice,
    pub paths: Vec<FlowPath>,
    pub dim: usize,
}

impl FlowLineSet {
    /// Columns `time,seed_id,x[,y,z],flag`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let axes = ["x", "y", "z"];
        write!(out, "time,seed_id")?;
        for a in &axes[..self.dim] {
            write!(out, ",{a}")?;
        }
        writeln!(out, ",flag")?;
        for (id, path) in self.paths.iter().enumerate() {
            for (t, r) in path.times.iter().zip(&path.positions) {
                write!(out, "{t:.16e},{id}")?;
                for x in &r[..self.dim] {
                    write!(out, ",{x:.16e}")?;
                }
                writeln!(out, ",{}", path.flag.name())?;
            }
        }
        Ok(())
    }

    pub fn flagged(&self) -> usize {
        self.paths.iter().filter(|p| p.flag != PathFlag::Ok).count()
    }

    /// In 1D, whether sorted seeds stay sorted at every recorded time.
    /// Paths are compared while both are defined.
    pub fn ordering_preserved(&self) -> Result<bool> {
        if self.dim != 1 {
            return Err(Error::Unsupported(
                "ordering is only defined in one dimension".into(),
            ));
        }
        let mut order: Vec<usize> = (0..self.paths.len())
            .filter(|&i| self.paths[i].flag != PathFlag::SeedMasked)
            .collect();
        order.sort_by(|&a, &b| self.seeds[a][0].total_cmp(&self.seeds[b][0]));
        for pair in order.windows(2) {
            let (lo, hi) = (&self.paths[pair[0]], &self.paths[pair[1]]);
            let common = lo.positions.len().min(hi.positions.len());
            if (0..common).any(|n| lo.positions[n][0] > hi.positions[n][0]) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Velocity samples at each recorded time, NaN where masked.
#[derive(Debug, Clone)]
pub struct VelocityHistory {
    grid: Arc<Grid>,
    times: Vec<f64>,
    /// `samples[n][axis][point]`
    samples: Vec<Vec<Vec<f64>>>,
}

impl VelocityHistory {
    pub fn from_fieldsets(fieldsets: &[FieldSet], choice: FieldChoice) -> Result<Self> {
        let first = fieldsets
            .first()
            .ok_or(Error::TooFewSnapshots { needed: 2, got: 0 })?;
        if fieldsets.len() < 2 {
            return Err(Error::TooFewSnapshots {
                needed: 2,
                got: fieldsets.len(),
            });
        }
        let m = first.params.mass;
        let samples = fieldsets
            .iter()
            .map(|fs| {
                let source = match choice {
                    FieldChoice::Cm => &fs.p,
                    FieldChoice::P1 => &fs.p1,
                    FieldChoice::P2 => &fs.p2,
                };
                source
                    .components()
                    .iter()
                    .map(|c| c.iter().map(|p| p / m).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: first.grid().clone(),
            times: fieldsets.iter().map(|f| f.time).collect(),
            samples,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Per-axis indices, scaled by the axis stride, and weights of the
    /// cubic stencil at `r`.
    fn stencil(&self, r: &[f64; 3]) -> ([[usize; 4]; 3], [[f64; 4]; 3]) {
        let g = &self.grid;
        let shape = g.shape();
        let mut idx = [[0usize; 4]; 3];
        let mut wts = [[1.0, 0.0, 0.0, 0.0]; 3];
        let mut stride = 1;
        for a in (0..g.dim()).rev() {
            let s = (r[a] - g.origin()[a]) / g.spacing()[a];
            let base = s.floor();
            let t = s - base;
            let n_a = shape[a];
            let mut i = (base as i64 - 1).rem_euclid(n_a as i64) as usize;
            for slot in idx[a].iter_mut() {
                *slot = i * stride;
                i += 1;
                if i == n_a {
                    i = 0;
                }
            }
            wts[a] = [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ];
            stride *= n_a;
        }
        (idx, wts)
    }

    /// Interpolated velocity of snapshot `n` at `r`, `None` if the stencil
    /// touches a masked point.
    pub fn sample(&self, n: usize, r: &[f64; 3]) -> Option<[f64; 3]> {
        self.velocity_at(n, 0.0, r)
    }

    fn interpolate(values: &[f64], idx: &[[usize; 4]; 3], wts: &[[f64; 4]; 3], dim: usize) -> f64 {
        let span = |a: usize| if a < dim { 4 } else { 1 };
        let mut acc = 0.0;
        for i in 0..span(0) {
            let mut acc_j = 0.0;
            for j in 0..span(1) {
                let mut acc_k = 0.0;
                for k in 0..span(2) {
                    acc_k += wts[2][k] * values[idx[0][i] + idx[1][j] + idx[2][k]];
                }
                acc_j += wts[1][j] * acc_k;
            }
            acc += wts[0][i] * acc_j;
        }
        acc
    }

    /// `(1-θ) v_n(r) + θ v_{n+1}(r)`.
    fn velocity_at(&self, n: usize, theta: f64, r: &[f64; 3]) -> Option<[f64; 3]> {
        let dim = self.grid.dim();
        let (idx, wts) = self.stencil(r);
        let mut v = [0.0; 3];
        for a in 0..dim {
            let mut acc = Self::interpolate(&self.samples[n][a], &idx, &wts, dim);
            if theta != 0.0 {
                let later = Self::interpolate(&self.samples[n + 1][a], &idx, &wts, dim);
                acc = (1.0 - theta) * acc + theta * later;
            }
            if acc.is_nan() {
                return None;
            }
            v[a] = acc;
        }
        Some(v)
    }

    fn velocity(&self, n: usize, theta: f64, r: &[f64; 3]) -> Option<[f64; 3]> {
        if theta >= 1.0 {
            return self.velocity_at(n + 1, 0.0, r);
        }
        self.velocity_at(n, theta, r)
    }

    /// RK4 with `substeps` steps per recording interval.
    pub fn integrate_one(&self, seed: [f64; 3], substeps: usize) -> FlowPath {
        let dim = self.grid.dim();
        let mut path = FlowPath {
            times: vec![self.times[0]],
            positions: vec![seed],
            wraps: [0; 3],
            flag: PathFlag::Ok,
        };
        if self.sample(0, &seed).is_none() {
            path.flag = PathFlag::SeedMasked;
            path.wraps = self.wraps(&seed);
            return path;
        }
        let mut r = seed;
        let axpy = |r: &[f64; 3], k: &[f64; 3], h: f64| -> [f64; 3] {
            std::array::from_fn(|i| if i < dim { r[i] + h * k[i] } else { 0.0 })
        };
        'intervals: for n in 0..self.times.len() - 1 {
            let dt = (self.times[n + 1] - self.times[n]) / substeps as f64;
            for s in 0..substeps {
                let th = s as f64 / substeps as f64;
                let dth = 1.0 / substeps as f64;
                let stages = (|| {
                    let k1 = self.velocity(n, th, &r)?;
                    let k2 = self.velocity(n, th + 0.5 * dth, &axpy(&r, &k1, 0.5 * dt))?;
                    let k3 = self.velocity(n, th + 0.5 * dth, &axpy(&r, &k2, 0.5 * dt))?;
                    let k4 = self.velocity(n, th + dth, &axpy(&r, &k3, dt))?;
                    Some((k1, k2, k3, k4))
                })();
                match stages {
                    Some((k1, k2, k3, k4)) => {
                        for i in 0..dim {
                            r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                        }
                    }
                    None => {
                        path.flag = PathFlag::Truncated;
                        break 'intervals;
                    }
                }
            }
            path.times.push(self.times[n + 1]);
            path.positions.push(r);
        }
        path.wraps = self.wraps(path.positions.last().unwrap());
        path
    }

    fn wraps(&self, r: &[f64; 3]) -> [i64; 3] {
        let g = &self.grid;
        std::array::from_fn(|a| {
            if a < g.dim() {
                ((r[a] - g.origin()[a]) / g.extent()[a]).floor() as i64
            } else {
                0
            }
        })
    }

    pub fn integrate(
        &self,
        seeds: &[[f64; 3]],
        choice: FieldChoice,
        substeps: usize,
    ) -> FlowLineSet {
        let substeps = substeps.max(1);
        let paths = seeds
            .par_iter()
            .map(|s| self.integrate_one(*s, substeps))
            .collect();
        FlowLineSet {
            seeds: seeds.to_vec(),
            field_choice: choice,
            paths,
            dim: self.grid.dim(),
        }
    }
}

/// Flow lines of the chosen field, with fields extracted at the default
/// mask threshold.
pub fn integrate_flow_lines(
    traj: &Trajectory,
    seeds: &[[f64; 3]],
    choice: FieldChoice,
    substeps: usize,
) -> Result<FlowLineSet> {
    let fieldsets = extract_all(traj, DEFAULT_MASK_EPSILON)?;
    Ok(VelocityHistory::from_fieldsets(&fieldsets, choice)?.integrate(seeds, choice, substeps))
}

fn extract_all(traj: &Trajectory, mask_epsilon: f64) -> Result<Vec<FieldSet>> {
    traj.snapshots
        .iter()
        .map(|s| extract_snapshot(s, &traj.potential, &traj.params, mask_epsilon))
        .collect()
}

/// Draws `n` points distributed as `|ψ|²`, treating each cell as uniform.
/// 1D uses the inverse CDF; higher dimensions use rejection against the
/// maximum cell weight.
pub fn sample_density(fs: &FieldSet, n: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    let g = fs.grid();
    let dim = g.dim();
    let w = fs.w.values();
    let h = g.spacing();
    let jitter = |rng: &mut dyn rand::RngCore, flat: usize| -> [f64; 3] {
        let c = g.position(flat);
        std::array::from_fn(|a| {
            if a < dim {
                c[a] + h[a] * (rng.random::<f64>() - 0.5)
            } else {
                0.0
            }
        })
    };
    if dim == 1 {
        let mut cdf = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for v in w {
            acc += v;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let cell = cdf.partition_point(|c| *c <= u).min(w.len() - 1);
                jitter(rng, cell)
            })
            .collect()
    } else {
        let w_max = w.iter().cloned().fold(0.0, f64::max);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let cell = rng.random_range(0..g.len());
            if rng.random::<f64>() * w_max < w[cell] {
                out.push(jitter(rng, cell));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivarianceOptions {
    pub bins: usize,
    pub tolerance: f64,
    pub substeps: usize,
    pub mask_epsilon: f64,
}

impl Default for EquivarianceOptions {
    fn default() -> Self {
        Self {
            bins: 64,
            tolerance: 0.05,
            substeps: 2,
            mask_epsilon: DEFAULT_MASK_EPSILON,
        }
    }
}

/// Minimum ensemble size for a meaningful histogram.
pub const MIN_SEEDS: usize = 10_000;

/// Histogram of flagged-free endpoints against `w` at the final time.
///
/// Bins tile each axis starting half a cell below the origin, so a bin
/// covers whole cells when the point count is a multiple of the bin count.
/// Beyond 1D the distance is the largest over the per-axis marginals.
fn total_variation(fs: &FieldSet, ends: &[[f64; 3]], bins: usize) -> f64 {
    let g = fs.grid();
    let dim = g.dim();
    let w = fs.w.values();
    let dv = g.cell_volume();
    let mut worst = 0.0_f64;
    for a in 0..dim {
        let lo = g.origin()[a] - 0.5 * g.spacing()[a];
        let len = g.extent()[a];
        let bin_of = |x: f64| {
            let u = (x - lo).rem_euclid(len) / len;
            ((u * bins as f64) as usize).min(bins - 1)
        };
        let mut reference = vec![0.0; bins];
        for (i, v) in w.iter().enumerate() {
            reference[bin_of(g.position(i)[a])] += v * dv;
        }
        let total: f64 = reference.iter().sum();
        let mut counts = vec![0.0; bins];
        for r in ends {
            counts[bin_of(r[a])] += 1.0;
        }
        let n = ends.len() as f64;
        let tv = 0.5
            * reference
                .iter()
                .zip(&counts)
                .map(|(q, c)| (q / total - c / n).abs())
                .sum::<f64>();
        worst = worst.max(tv);
    }
    worst
}

/// Seeds drawn from `w(·,t₀)` and advected by the cm flow should be
/// distributed as `w(·,T)`.
///
/// Values: `[total-variation distance, seeds, flagged paths, bins]`.
pub fn ensemble_equivariance(
    traj: &Trajectory,
    n_seeds: usize,
    rng: &mut impl Rng,
    options: &EquivarianceOptions,
) -> Result<Check> {
    if n_seeds < MIN_SEEDS {
        return Err(Error::TooFewSeeds {
            needed: MIN_SEEDS,
            got: n_seeds,
        });
    }
    let fieldsets = extract_all(traj, options.mask_epsilon)?;
    let history = VelocityHistory::from_fieldsets(&fieldsets, FieldChoice::Cm)?;
    let seeds = sample_density(&fieldsets[0], n_seeds, rng);
    let lines = history.integrate(&seeds, FieldChoice::Cm, options.substeps);
    let ends: Vec<[f64; 3]> = lines
        .paths
        .iter()
        .filter(|p| p.flag == PathFlag::Ok)
        .map(|p| p.end())
        .collect();
    let last = fieldsets.last().unwrap();
    let tv = total_variation(last, &ends, options.bins);
    Ok(Check::at_most(
        "equivariance.total_variation",
        tv,
        options.tolerance,
        &[n_seeds as f64, lines.flagged() as f64, options.bins as f64],
        last.masked_fraction(),
    ))
}
