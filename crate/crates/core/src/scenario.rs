//! Scenario files and the pipeline behind the `qfields` command.
//!
//! A scenario is a TOML document with the sections `[grid]`, `[physics]`,
//! `[state]`, `[potential]`, `[evolution]`, `[fields]`, `[verify]`,
//! `[flow]` and `[output]`. Only `[grid]` and `[state]` are required; see
//! `docs/config.md` for every key.
//!
//! Outputs land in one directory: `fields_t<time>.csv` per requested time,
//! `uncertainty.csv` for evolved runs, `flow_<choice>.csv` per flow field,
//! `verification.json` and `manifest.json`. Everything except the manifest's
//! `wall_time_seconds` and `timestamp_unix` is a pure function of the
//! configuration and seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::{evolve_record, EvolutionParams, Potential, Snapshot, Trajectory};
use crate::fields::{extract_snapshot, FieldSet, DEFAULT_MASK_EPSILON};
use crate::grid::{make_grid, ComplexField, Grid};
use crate::states::{realize, PhysicalParams, StateKind, StateSpec};
use crate::trajectories::{
    ensemble_equivariance, EquivarianceOptions, FieldChoice, VelocityHistory, INTERPOLATION,
};
use crate::verify::{self, Check, GridMetadata, ScenarioMetadata, VerificationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
    pub extent: Vec<f64>,
    /// Defaults to `-extent/2` on every axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<Grid>> {
        let origin = match &self.origin {
            Some(o) => o.clone(),
            None => self.extent.iter().map(|l| -0.5 * l).collect(),
        };
        make_grid(&self.points, &self.extent, &origin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(default = "default_mask")]
    pub mask_epsilon: f64,
    /// Times at which field CSVs are written; each must be a recorded time.
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
}

fn default_mask() -> f64 {
    DEFAULT_MASK_EPSILON
}

fn default_times() -> Vec<f64> {
    vec![0.0]
}

impl Default for FieldsConfig {
    fn default() -> Self {
        Self {
            mask_epsilon: default_mask(),
            times: default_times(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Operator expectations against field averages.
    Born,
    /// `∫K w = ∫K̃ w`.
    Kinetic,
    /// Per-axis uncertainty products, plus their time series when evolved.
    Uncertainty,
    /// The two-momentum-field identities.
    TwoField,
    /// `E = p²/2m + U + V` and `ℏω = E`.
    Energy,
    /// `U` from the amplitude against `K_w + U_w`.
    BohmSplit,
    Continuity,
    Transport,
    /// The curl identity on seeded random fields of the scenario's grid.
    VectorIdentity,
    /// Signs of `K` and `K̃` in the forbidden region.
    Signs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub checks: Vec<Suite>,
    /// Energy separating allowed from forbidden points, for `signs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_scale: Option<f64>,
    #[serde(default = "continuity_tol")]
    pub continuity_tolerance: f64,
    #[serde(default = "transport_tol")]
    pub transport_tolerance: f64,
    #[serde(default = "random_fields")]
    pub random_fields: usize,
}

fn continuity_tol() -> f64 {
    1e-3
}

fn transport_tol() -> f64 {
    1e-2
}

fn random_fields() -> usize {
    20
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            energy_scale: None,
            continuity_tolerance: continuity_tol(),
            transport_tolerance: transport_tol(),
            random_fields: random_fields(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_choices")]
    pub choices: Vec<FieldChoice>,
    /// Explicit seed positions, one coordinate per grid axis.
    #[serde(default)]
    pub seeds: Vec<Vec<f64>>,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Size of the density-sampled ensemble for the equivariance check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_tv")]
    pub tolerance: f64,
}

fn default_choices() -> Vec<FieldChoice> {
    vec![FieldChoice::Cm]
}

fn default_substeps() -> usize {
    2
}

fn default_bins() -> usize {
    64
}

fn default_tv() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub physics: PhysicalParams,
    pub state: StateKind,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn state_spec(&self) -> StateSpec {
        StateSpec::new(self.state.clone(), self.physics)
    }

    pub fn span(&self) -> f64 {
        self.evolution
            .as_ref()
            .map_or(0.0, |e| e.dt * e.steps as f64)
    }

    fn recorded_times(&self) -> Vec<f64> {
        match &self.evolution {
            None => vec![0.0],
            Some(e) => {
                let mut t: Vec<f64> = (0..=e.steps)
                    .filter(|n| n % e.record_every == 0)
                    .map(|n| n as f64 * e.dt)
                    .collect();
                if e.steps % e.record_every != 0 {
                    t.push(e.steps as f64 * e.dt);
                }
                t
            }
        }
    }

    /// Index of the recorded snapshot at time `t`.
    fn snapshot_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.span().max(1.0);
        self.recorded_times()
            .iter()
            .position(|r| (r - t).abs() <= tol)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.physics.validate()?;
        self.potential.validate()?;
        let dim = grid.dim();
        if let Some(e) = &self.evolution {
            EvolutionParams::new(e.dt, e.steps, e.record_every, self.physics).validate()?;
        }
        let eps = self.fields.mask_epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!(
                "mask_epsilon {eps} must lie in (0, 1)"
            )));
        }
        let span = self.span();
        for &t in &self.fields.times {
            if !(0.0..=span * (1.0 + 1e-12)).contains(&t) {
                return Err(Error::Config(format!("field time {t} outside [0, {span}]")));
            }
            if self.snapshot_index(t).is_none() {
                return Err(Error::Config(format!(
                    "field time {t} is not a recorded time"
                )));
            }
        }
        let recorded = self.recorded_times().len();
        for suite in &self.verify.checks {
            match suite {
                Suite::Continuity | Suite::Transport if recorded < 3 => {
                    return Err(Error::Config(format!(
                        "{suite:?} needs at least 3 recorded snapshots, the evolution gives {recorded}"
                    )))
                }
                Suite::Continuity | Suite::Transport
                    if self.evolution.as_ref().is_some_and(|e| e.steps % e.record_every != 0) =>
                {
                    return Err(Error::Config(format!(
                        "{suite:?} needs a uniform recording: steps must be a multiple of record_every"
                    )))
                }
                Suite::VectorIdentity if dim == 1 => {
                    return Err(Error::Config("vector_identity needs a 2D or 3D grid".into()))
                }
                Suite::Signs if self.verify.energy_scale.is_none_or(|e| e.is_nan() || e <= 0.0) => {
                    return Err(Error::Config("signs needs a positive energy_scale".into()))
                }
                _ => {}
            }
        }
        if let Some(flow) = &self.flow {
            if recorded < 2 {
                return Err(Error::Config("flow lines need an evolution".into()));
            }
            if let Some(s) = flow.seeds.iter().find(|s| s.len() != dim) {
                return Err(Error::Config(format!(
                    "seed {s:?} does not have {dim} coordinates"
                )));
            }
            if flow.bins == 0 || flow.substeps == 0 {
                return Err(Error::Config(
                    "flow bins and substeps must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn metadata(&self, grid: &Grid) -> ScenarioMetadata {
        ScenarioMetadata {
            grid: GridMetadata::from(grid),
            state: serde_json::to_value(&self.state).expect("state serializes"),
            potential: serde_json::to_value(&self.potential).expect("potential serializes"),
            params: self.physics,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The full pipeline.
    Run,
    /// Checks only.
    Verify,
    /// Field CSVs only.
    Fields,
    /// Flow lines only.
    Flow,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Verify => "verify",
            Mode::Fields => "fields",
            Mode::Flow => "flow",
        }
    }

    fn fields(self) -> bool {
        matches!(self, Mode::Run | Mode::Fields)
    }

    fn checks(self) -> bool {
        matches!(self, Mode::Run | Mode::Verify)
    }

    fn flow(self) -> bool {
        matches!(self, Mode::Run | Mode::Flow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedFraction {
    pub time: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub qfields: String,
    pub output_format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub interpolation: String,
    pub masked_fractions: Vec<MaskedFraction>,
    pub files: Vec<FileEntry>,
    pub exit_code: i32,
    pub wall_time_seconds: f64,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Option<VerificationReport>,
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

fn time_label(t: f64) -> String {
    format!("{t:.4}")
}

/// Everything the pipeline computes before writing.
struct Run {
    grid: Arc<Grid>,
    psi0: ComplexField,
    traj: Trajectory,
    fieldsets: Vec<FieldSet>,
}

fn evolve(scenario: &Scenario) -> Result<Run> {
    let grid = scenario.grid.build()?;
    let spec = scenario.state_spec();
    let psi0 = realize(&spec, &grid)?;
    let traj = match &scenario.evolution {
        Some(e) => evolve_record(
            &psi0,
            &scenario.potential,
            &EvolutionParams::new(e.dt, e.steps, e.record_every, scenario.physics),
        )?,
        None => Trajectory {
            snapshots: vec![Snapshot {
                time: 0.0,
                psi: psi0.clone(),
            }],
            potential: scenario.potential.clone(),
            params: scenario.physics,
            record_interval: 0.0,
        },
    };
    let eps = scenario.fields.mask_epsilon;
    let fieldsets = traj
        .snapshots
        .iter()
        .map(|s| extract_snapshot(s, &scenario.potential, &scenario.physics, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Run {
        grid,
        psi0,
        traj,
        fieldsets,
    })
}

fn tagged(checks: Vec<Check>, t: f64) -> impl Iterator<Item = Check> {
    checks.into_iter().map(move |mut c| {
        c.name = format!("{}@t={}", c.name, time_label(t));
        c
    })
}

fn run_checks(scenario: &Scenario, run: &Run) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Some(scenario.metadata(&run.grid)));
    let cfg = &scenario.verify;
    let eps = scenario.fields.mask_epsilon;
    let at_times: Vec<usize> = scenario
        .fields
        .times
        .iter()
        .map(|&t| scenario.snapshot_index(t).expect("validated"))
        .collect();
    let mut forbidden_seen = false;
    for suite in &cfg.checks {
        for &n in &at_times {
            let fs = &run.fieldsets[n];
            let psi = &run.traj.snapshots[n].psi;
            let checks = match suite {
                Suite::Born => verify::born_consistency(psi, fs, &scenario.physics)?,
                Suite::Kinetic => verify::kinetic_equivalence(fs),
                Suite::Uncertainty => verify::uncertainty_products(fs),
                Suite::TwoField => verify::two_field_identities(fs),
                Suite::Energy => verify::energy_field_consistency(fs),
                Suite::BohmSplit => vec![verify::bohm_split_consistency(psi, fs)?],
                Suite::Signs => {
                    let e_scale = cfg.energy_scale.expect("validated");
                    match verify::sign_checks(fs, e_scale) {
                        Ok(c) => {
                            forbidden_seen = true;
                            c
                        }
                        Err(Error::Unsupported(_)) => vec![verify::kinetic_positivity(fs, e_scale)],
                        Err(e) => return Err(e),
                    }
                }
                _ => Vec::new(),
            };
            report.extend(tagged(checks, fs.time));
        }
        match suite {
            Suite::Continuity => {
                let r = verify::continuity_residual(&run.traj, &run.fieldsets)?;
                report.push(r.check("continuity.residual", cfg.continuity_tolerance));
            }
            Suite::Transport => {
                let r = verify::transport_residual(
                    &run.traj,
                    &run.fieldsets,
                    &scenario.potential,
                    eps,
                )?;
                report.extend(r.checks(cfg.transport_tolerance));
            }
            // only free spreading is monotone; bound states oscillate
            Suite::Uncertainty
                if run.fieldsets.len() > 1 && scenario.potential == Potential::Free =>
            {
                report.extend(uncertainty_monotonicity(&run.fieldsets));
            }
            Suite::VectorIdentity => {
                let max_mode = run.grid.shape().iter().min().copied().unwrap_or(8) / 4 - 1;
                let max_mode = max_mode.clamp(1, 3);
                let mut worst: Option<Check> = None;
                for k in 0..cfg.random_fields {
                    let v = verify::random_band_limited(
                        &run.grid,
                        max_mode,
                        scenario.output.seed.wrapping_add(k as u64),
                    );
                    let c = verify::vector_identity_residual(&v)?;
                    if worst.as_ref().is_none_or(|w| c.measure() > w.measure()) {
                        worst = Some(c);
                    }
                }
                if let Some(mut c) = worst {
                    c.name = format!("vector_identity.worst_of_{}", cfg.random_fields);
                    report.push(c);
                }
            }
            Suite::Signs if !forbidden_seen => {
                return Err(Error::Unsupported(
                    "no requested time has unmasked points in a classically forbidden region"
                        .into(),
                ));
            }
            _ => {}
        }
    }
    Ok(report)
}

/// `D_px D_x` never drops along the run by more than round-off.
/// Values: `[largest relative drop]` per axis.
pub fn uncertainty_monotonicity(fieldsets: &[FieldSet]) -> Vec<Check> {
    let first = &fieldsets[0];
    let bound = first.params.hbar * first.params.hbar / 4.0;
    let series: Vec<Vec<f64>> = fieldsets
        .iter()
        .map(|fs| {
            verify::uncertainty_moments(fs)
                .iter()
                .map(|u| u.product())
                .collect()
        })
        .collect();
    (0..first.grid().dim())
        .map(|a| {
            let drop = series
                .windows(2)
                .map(|w| (w[0][a] - w[1][a]) / bound)
                .fold(f64::NEG_INFINITY, f64::max);
            Check::at_most(
                format!("uncertainty.nondecreasing.{}", ["x", "y", "z"][a]),
                drop,
                verify::UNCERTAINTY_SLACK,
                &[],
                fieldsets.last().unwrap().masked_fraction(),
            )
        })
        .collect()
}

fn uncertainty_csv(fieldsets: &[FieldSet]) -> String {
    let dim = fieldsets[0].grid().dim();
    let axes = ["x", "y", "z"];
    let mut out = String::from("t");
    for a in &axes[..dim] {
        out += &format!(",D{a},Dp{a},product_{a}");
    }
    out.push('\n');
    for fs in fieldsets {
        out += &format!("{:.16e}", fs.time);
        for u in verify::uncertainty_moments(fs) {
            out += &format!(
                ",{:.16e},{:.16e},{:.16e}",
                u.position_variance,
                u.momentum_variance,
                u.product()
            );
        }
        out.push('\n');
    }
    out
}

fn flow_outputs(
    scenario: &Scenario,
    run: &Run,
    writer: &mut Writer,
    report: &mut VerificationReport,
) -> Result<()> {
    let Some(flow) = &scenario.flow else {
        return Ok(());
    };
    let seeds: Vec<[f64; 3]> = flow
        .seeds
        .iter()
        .map(|s| std::array::from_fn(|a| s.get(a).copied().unwrap_or(0.0)))
        .collect();
    if !seeds.is_empty() {
        for &choice in &flow.choices {
            let history = VelocityHistory::from_fieldsets(&run.fieldsets, choice)?;
            let lines = history.integrate(&seeds, choice, flow.substeps);
            let mut buf = Vec::new();
            lines.write_csv(&mut buf)?;
            writer.write(&format!("flow_{}.csv", choice.name()), &buf)?;
            if choice == FieldChoice::Cm && run.grid.dim() == 1 {
                let ordered = lines.ordering_preserved()?;
                report.push(Check::at_least(
                    "flow.cm.ordering_preserved",
                    f64::from(u8::from(ordered)),
                    1.0,
                    &[lines.flagged() as f64],
                    run.fieldsets.last().unwrap().masked_fraction(),
                ));
            }
        }
    }
    if let Some(n) = flow.ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.output.seed);
        let options = EquivarianceOptions {
            bins: flow.bins,
            tolerance: flow.tolerance,
            substeps: flow.substeps,
            mask_epsilon: scenario.fields.mask_epsilon,
        };
        report.push(ensemble_equivariance(&run.traj, n, &mut rng, &options)?);
    }
    Ok(())
}

/// Runs `scenario` in `mode`, writing into `out_dir`. `config_bytes` is
/// hashed into the manifest.
pub fn execute(
    scenario: &Scenario,
    mode: Mode,
    out_dir: &Path,
    config_bytes: &[u8],
) -> Result<Outcome> {
    let start = Instant::now();
    scenario.validate()?;
    let mut writer = Writer::new(out_dir)?;
    let run = evolve(scenario)?;
    debug_assert!(run.psi0.is_finite());

    if mode.fields() {
        for &t in &scenario.fields.times {
            let fs = &run.fieldsets[scenario.snapshot_index(t).expect("validated")];
            let mut buf = Vec::new();
            fs.write_csv(&mut buf)?;
            writer.write(&format!("fields_t{}.csv", time_label(t)), &buf)?;
        }
        if run.fieldsets.len() > 1 {
            writer.write(
                "uncertainty.csv",
                uncertainty_csv(&run.fieldsets).as_bytes(),
            )?;
        }
    }

    let mut report = if mode.checks() {
        Some(run_checks(scenario, &run)?)
    } else {
        None
    };
    if mode.flow() {
        let mut flow_report = VerificationReport::new(None);
        flow_outputs(scenario, &run, &mut writer, &mut flow_report)?;
        match (&mut report, mode) {
            (Some(r), _) => r.extend(flow_report.checks),
            (None, Mode::Flow) if !flow_report.checks.is_empty() => {
                let mut r = VerificationReport::new(Some(scenario.metadata(&run.grid)));
                r.extend(flow_report.checks);
                report = Some(r);
            }
            _ => {}
        }
    }
    if let Some(r) = &report {
        writer.write("verification.json", r.to_json().as_bytes())?;
    }

    let exit_code = match &report {
        Some(r) if !r.all_passed() => 1,
        _ => 0,
    };
    let masked_fractions = scenario
        .fields
        .times
        .iter()
        .map(|&t| MaskedFraction {
            time: t,
            fraction: run.fieldsets[scenario.snapshot_index(t).expect("validated")]
                .masked_fraction(),
        })
        .collect();
    let manifest = Manifest {
        subcommand: mode.name().into(),
        scenario: scenario.name.clone(),
        config_sha256: sha256_hex(config_bytes),
        seed: scenario.output.seed,
        threads: rayon::current_num_threads(),
        versions: Versions {
            qfields: env!("CARGO_PKG_VERSION").into(),
            output_format: 1,
        },
        interpolation: INTERPOLATION.into(),
        masked_fractions,
        files: writer.files.clone(),
        exit_code,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join("manifest.json"), json)?;
    Ok(Outcome {
        report,
        manifest,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Command-line overrides of the `[output]` section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Loads `config`, applies overrides and runs.
pub fn run_scenario(config: &Path, mode: Mode, overrides: &Overrides) -> Result<Outcome> {
    let bytes =
        fs::read(config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Config(format!("{} is not UTF-8", config.display())))?;
    let mut scenario = Scenario::from_toml_str(&text)?;
    if let Some(seed) = overrides.seed {
        scenario.output.seed = seed;
    }
    let out = overrides
        .out
        .clone()
        .unwrap_or_else(|| scenario.output.dir.clone());
    execute(&scenario, mode, &out, &bytes)
}

/// Built-in oracle suite on small grids, independent of any scenario.
pub fn selftest() -> Result<VerificationReport> {
    let params = PhysicalParams::natural();
    let mut report = VerificationReport::new(None);
    let free = Potential::Free;
    let extract =
        |spec: &StateSpec, grid: &Arc<Grid>, v: &Potential| -> Result<(ComplexField, FieldSet)> {
            let psi = realize(spec, grid)?;
            let fs = crate::fields::extract_fields(&psi, v, &spec.params, DEFAULT_MASK_EPSILON)?;
            Ok((psi, fs))
        };

    let ring = make_grid(
        &[64],
        &[2.0 * std::f64::consts::PI],
        &[-std::f64::consts::PI],
    )?;
    let (psi, fs) = extract(&StateSpec::plane_wave(&[2.0]), &ring, &free)?;
    report.extend(
        verify::born_consistency(&psi, &fs, &params)?
            .into_iter()
            .map(|mut c| {
                c.name = format!("plane_wave.{}", c.name);
                c
            }),
    );

    let line = make_grid(&[512], &[40.0], &[-20.0])?;
    for sigma in [0.5, 1.0, 2.0] {
        let (_, fs) = extract(&StateSpec::gaussian(&[0.0], &[0.0], &[sigma]), &line, &free)?;
        let product = verify::uncertainty_moments(&fs)[0].product();
        report.push(Check::at_most(
            format!("gaussian.saturation.sigma={sigma}"),
            (product - 0.25).abs() / 0.25,
            1e-6,
            &[product],
            fs.masked_fraction(),
        ));
        report.extend(verify::kinetic_equivalence(&fs).into_iter().map(|mut c| {
            c.name = format!("gaussian.{}.sigma={sigma}", c.name);
            c
        }));
    }

    let trap = Potential::harmonic(1.0);
    let (_, fs) = extract(&StateSpec::ho_eigenstate(&[0], 1.0), &line, &trap)?;
    let dev = fs
        .unmasked()
        .map(|i| {
            (fs.e.values()[i] - 0.5)
                .abs()
                .max((fs.omega.values()[i] - 0.5).abs())
        })
        .fold(0.0, f64::max);
    report.push(Check::at_most(
        "ho_ground.energy_flat",
        dev,
        1e-6,
        &[],
        fs.masked_fraction(),
    ));

    let plane = make_grid(&[128, 128], &[24.0, 24.0], &[-12.0, -12.0])?;
    let (psi, fs) = extract(&StateSpec::vortex2d([0.0, 0.0], 1.0), &plane, &free)?;
    let ops = verify::operator_expectations(&psi, &fs.potential, &params)?;
    let mz = ops.angular_momentum[0];
    report.push(Check::at_most(
        "vortex.angular_momentum",
        (mz - params.hbar).abs() / params.hbar,
        1e-8,
        &[mz],
        fs.masked_fraction(),
    ));

    let wide = make_grid(&[512], &[60.0], &[-30.0])?;
    let (_, fs) = extract(&StateSpec::evanescent(0.0, 1.0), &wide, &free)?;
    let dev = fs
        .unmasked()
        .filter(|&i| (8.0..12.0).contains(&wide.coordinate(0, i).abs()))
        .map(|i| {
            (fs.k.values()[i] - 0.5)
                .abs()
                .max((fs.k_tilde.values()[i] + 0.5).abs())
        })
        .fold(0.0, f64::max);
    report.push(Check::at_most(
        "evanescent.kinetic_signs",
        dev,
        1e-6,
        &[],
        fs.masked_fraction(),
    ));

    let torus = make_grid(&[32, 32], &[1.0, 1.0], &[0.0, 0.0])?;
    let mut c = verify::vector_identity_residual(&verify::random_band_limited(&torus, 3, 1))?;
    c.name = "random_field.vector_identity".into();
    report.push(c);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSSIAN: &str = r#"
name = "gaussian"

[grid]
points = [256]
extent = [40.0]

[state]
kind = "gaussian"
center = [0.0]
momentum = [0.0]
sigma = [1.0]

[evolution]
dt = 0.01
steps = 20
record_every = 2

[fields]
times = [0.0, 0.2]

[verify]
checks = ["uncertainty", "born", "continuity"]

[flow]
choices = ["cm", "p1"]
seeds = [[-1.0], [0.0], [1.0]]
"#;

    #[test]
    fn round_trip() {
        let s = Scenario::from_toml_str(GAUSSIAN).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.grid.build().unwrap().origin(), &[-20.0]);
    }

    #[test]
    fn superposition_round_trip() {
        let text = r#"
[grid]
points = [128]
extent = [20.0]
[state]
kind = "superposition"
[[state.terms]]
re = 1.0
state = { kind = "ho_eigenstate", quanta = [0], omega = 1.0 }
[[state.terms]]
re = 0.0
im = 1.0
state = { kind = "ho_eigenstate", quanta = [1], omega = 1.0 }
[potential]
kind = "harmonic"
omega = 1.0
"#;
        let s = Scenario::from_toml_str(text).unwrap();
        assert_eq!(s, Scenario::from_toml_str(&s.to_toml()).unwrap());
        s.validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        let mut s = Scenario::from_toml_str(GAUSSIAN).unwrap();
        s.fields.times = vec![5.0];
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        s.fields.times = vec![0.01];
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = Scenario::from_toml_str(GAUSSIAN).unwrap();
        s.verify.checks.push(Suite::VectorIdentity);
        assert_eq!(s.validate().unwrap_err().exit_code(), 2);
        assert!(
            Scenario::from_toml_str("[grid]\npoints = [8]\nextent = [1.0]\nbogus = 1\n").is_err()
        );
    }

    #[test]
    fn execute_writes_listed_files() {
        let s = Scenario::from_toml_str(GAUSSIAN).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = execute(&s, Mode::Run, dir.path(), GAUSSIAN.as_bytes()).unwrap();
        assert_eq!(outcome.exit_code(), 0, "{:#?}", outcome.report);
        let names: Vec<&str> = outcome
            .manifest
            .files
            .iter()
            .map(|f| f.path.as_str())
            .collect();
        assert_eq!(
            names,
            [
                "fields_t0.0000.csv",
                "fields_t0.2000.csv",
                "uncertainty.csv",
                "flow_cm.csv",
                "flow_p1.csv",
                "verification.json"
            ]
        );
        for f in &outcome.manifest.files {
            let bytes = fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
        }
        let header = fs::read_to_string(dir.path().join("fields_t0.0000.csv")).unwrap();
        assert!(header.starts_with("t,x,w,px,pwx,Kw,Uw,U,K,Ktilde,E,omega,p1x,p2x,masked\n"));
    }

    #[test]
    fn absurd_step_aborts_with_code_3() {
        let mut s = Scenario::from_toml_str(GAUSSIAN).unwrap();
        s.evolution = Some(EvolutionConfig {
            dt: 1e307,
            steps: 3,
            record_every: 1,
        });
        s.fields.times = vec![0.0];
        s.flow = None;
        let dir = tempfile::tempdir().unwrap();
        let err = execute(&s, Mode::Run, dir.path(), b"").unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn selftest_passes() {
        let report = selftest().unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{failures:#?}");
    }
}
