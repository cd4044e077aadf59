//! TOML run configuration.
//!
//! ```toml
//! experiment = "evolve"        # optional; must match the CLI subcommand
//! seed = 7
//! output_dir = "out"           # relative paths resolve against the config file
//!
//! [grid]
//! n_points = 4096
//! length = 200.0
//!
//! [potential]
//! family = "gaussian_matched_step"   # logistic_step | flat | custom_samples
//! h = 2.0
//! w = 1.0
//! a_minus = 0.0
//! a_plus = 1.0
//! # csv = "v.csv"                   # custom_samples only
//!
//! [initial]
//! shape = "gaussian"          # amplitude·exp(-((x-center)/width)²)·e^{i k x}
//! amplitude = 1.0
//!
//! [solver]
//! alpha = 5.0
//! dt = 1e-3
//! t_final = 10.0
//! record_stride = 0.1
//! ```
//!
//! Experiment-specific tables (`propagator`, `channels`, `decay`, `morawetz`,
//! `profiles`, `translation`, `sweep`) are all optional and documented on their
//! structs. Unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cli_io::checkpoint::read_checkpoint;
use crate::diagnostics::MorawetzOptions;
use crate::diagnostics::TimeDerivative;
use crate::error::{Result, SnlsError};
use crate::nls::NlsProblem;
use crate::potentials::{load_csv_table, PotentialFamily, PotentialSpec, SampledPotential};
use crate::propagators::{PerturbedPropagator, PropagationMethod};
use crate::scattering::{MissingSnapshot, ProfileEstimator};
use crate::spectral::{ComplexField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Evolve,
    Channels,
    LinearChannels,
    Morawetz,
    Decay,
    Profiles,
    TranslationGap,
    CheckPotential,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Evolve,
        Experiment::Channels,
        Experiment::LinearChannels,
        Experiment::Morawetz,
        Experiment::Decay,
        Experiment::Profiles,
        Experiment::TranslationGap,
        Experiment::CheckPotential,
        Experiment::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Channels => "channels",
            Experiment::LinearChannels => "linear_channels",
            Experiment::Morawetz => "morawetz",
            Experiment::Decay => "decay",
            Experiment::Profiles => "profiles",
            Experiment::TranslationGap => "translation_gap",
            Experiment::CheckPotential => "check_potential",
            Experiment::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = SnlsError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| SnlsError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub family: PotentialFamily,
    #[serde(alias = "height")]
    pub h: Option<f64>,
    #[serde(alias = "width")]
    pub w: Option<f64>,
    pub a_minus: Option<f64>,
    pub a_plus: Option<f64>,
    pub csv: Option<PathBuf>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            family: PotentialFamily::GaussianMatchedStep,
            h: None,
            w: None,
            a_minus: None,
            a_plus: None,
            csv: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialShape {
    #[default]
    Gaussian,
    Sech,
    Zero,
    /// Field read from a checkpoint file (`path`).
    Checkpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub shape: InitialShape,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
    pub path: Option<PathBuf>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            shape: InitialShape::Gaussian,
            amplitude: 1.0,
            center: 0.0,
            width: 1.0,
            wavenumber: 0.0,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub alpha: f64,
    pub dt: f64,
    pub t_final: Option<f64>,
    pub record_times: Option<Vec<f64>>,
    pub record_stride: Option<f64>,
    /// Drop the nonlinearity.
    pub linear: bool,
    /// Accept `α` below 4 (down to the Strichartz threshold); runs are flagged.
    pub permissive: bool,
    /// Write a checkpoint for every recorded snapshot.
    pub save_snapshots: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 5.0,
            dt: 1e-3,
            t_final: None,
            record_times: None,
            record_stride: None,
            linear: false,
            permissive: false,
            save_snapshots: false,
        }
    }
}

/// Linear flow used by the linear experiments and for pull-backs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    pub method: PropagationMethod,
    pub dt: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            method: PropagationMethod::StrangSplitting,
            dt: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelsConfig {
    /// Extraction index.
    pub n: usize,
    /// Wave-operator times for the nonlinear run; defaults to `[t_final]`.
    /// Channels are extracted at the last one.
    pub times: Option<Vec<f64>>,
    pub missing_snapshot: MissingSnapshot,
}

impl Default for ChannelsConfig {
    fn default() -> Self {
        ChannelsConfig {
            n: 6,
            times: None,
            missing_snapshot: MissingSnapshot::Error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Explicit sample times; otherwise `t_start..=t_end` every `spacing`.
    pub times: Option<Vec<f64>>,
    pub t_start: f64,
    pub t_end: f64,
    pub spacing: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            times: None,
            t_start: 1.0,
            t_end: 100.0,
            spacing: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorawetzConfig {
    pub t_min: f64,
    pub time_derivative: TimeDerivative,
}

impl Default for MorawetzConfig {
    fn default() -> Self {
        let d = MorawetzOptions::default();
        MorawetzConfig {
            t_min: d.t_min,
            time_derivative: d.time_derivative,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFixture {
    /// Translates of the initial datum.
    #[default]
    Single,
    /// Translates of the initial datum plus translates of a second Gaussian.
    Two,
    /// Random-phase noise seeded by the top-level `seed`.
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilesConfig {
    pub fixture: ProfileFixture,
    pub count: usize,
    /// Shifts of the first profile; default `-40 + 10k`, or `-5k - 3` for `two`.
    pub shifts: Option<Vec<f64>>,
    /// Shifts of the second profile; default `6k + 9`.
    pub shifts2: Option<Vec<f64>>,
    pub amplitude2: f64,
    pub width2: f64,
    pub j_max: usize,
    pub estimator: ProfileEstimator,
    /// Defaults to the `q` exponent of `solver.alpha`.
    pub q_exponent: Option<f64>,
    pub time_window: f64,
    pub time_spacing: f64,
    pub stop_fraction: f64,
    pub coherence_threshold: f64,
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        let d = crate::scattering::ProfileOptions::default();
        ProfilesConfig {
            fixture: ProfileFixture::Single,
            count: 8,
            shifts: None,
            shifts2: None,
            amplitude2: 0.6,
            width2: std::f64::consts::SQRT_2,
            j_max: d.j_max,
            estimator: d.estimator,
            q_exponent: None,
            time_window: d.time_window,
            time_spacing: d.time_spacing,
            stop_fraction: d.stop_fraction,
            coherence_threshold: d.coherence_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranslationConfig {
    pub shifts: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub sample_spacing: f64,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            shifts: vec![-40.0, -20.0, -10.0, 10.0, 20.0, 40.0],
            t_start: 0.0,
            t_end: 5.0,
            sample_spacing: 0.05,
        }
    }
}

/// One-parameter sweep: `parameter` is a dotted key such as `"solver.dt"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default)]
    pub channels: ChannelsConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub morawetz: MorawetzConfig,
    #[serde(default)]
    pub profiles: ProfilesConfig,
    #[serde(default)]
    pub translation: TranslationConfig,
    pub sweep: Option<SweepConfig>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub raw: toml::Table,
}

fn config_err(msg: impl Into<String>) -> SnlsError {
    SnlsError::Config(msg.into())
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        Self::from_table(raw, base_dir)
    }

    pub fn from_table(raw: toml::Table, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::Value::Table(raw.clone())
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.raw = raw;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Output directory from the config, falling back to `./output`.
    pub fn output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(p) => self.resolve(p),
            None => PathBuf::from("output"),
        }
    }

    /// Checks that everything `experiment` needs is present and every
    /// referenced file exists.
    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        if let Some(declared) = self.experiment {
            if declared != experiment {
                return Err(config_err(format!(
                    "config declares experiment '{declared}' but '{experiment}' was requested"
                )));
            }
        }
        if let Some(csv) = &self.potential.csv {
            if self.potential.family != PotentialFamily::CustomSamples {
                return Err(config_err("potential.csv is only used by family = \"custom_samples\""));
            }
            if !self.resolve(csv).is_file() {
                return Err(config_err(format!("potential csv {} does not exist", self.resolve(csv).display())));
            }
        } else if self.potential.family == PotentialFamily::CustomSamples {
            return Err(config_err("family = \"custom_samples\" needs potential.csv"));
        }
        if self.initial.shape == InitialShape::Checkpoint {
            let path = self
                .initial
                .path
                .as_ref()
                .ok_or_else(|| config_err("initial.shape = \"checkpoint\" needs initial.path"))?;
            if !self.resolve(path).is_file() {
                return Err(config_err(format!("initial checkpoint {} does not exist", self.resolve(path).display())));
            }
        }
        let needs_run = matches!(
            experiment,
            Experiment::Evolve | Experiment::Channels | Experiment::Morawetz
        );
        if needs_run && self.solver.t_final.is_none() {
            return Err(config_err(format!("experiment '{experiment}' needs solver.t_final")));
        }
        if experiment == Experiment::Morawetz
            && self.solver.record_stride.is_none()
            && self.solver.record_times.is_none()
        {
            return Err(config_err("experiment 'morawetz' needs solver.record_stride or solver.record_times"));
        }
        if experiment == Experiment::Sweep {
            let sweep = self.sweep.as_ref().ok_or_else(|| config_err("experiment 'sweep' needs a [sweep] table"))?;
            if sweep.experiment == Experiment::Sweep {
                return Err(config_err("sweeps cannot nest"));
            }
            if sweep.values.is_empty() {
                return Err(config_err("sweep.values is empty"));
            }
            if sweep.parameter.split('.').any(str::is_empty) {
                return Err(config_err(format!("bad sweep parameter '{}'", sweep.parameter)));
            }
        }
        if experiment == Experiment::Profiles && self.profiles.count == 0 {
            return Err(config_err("profiles.count must be positive"));
        }
        if let Some(s) = self.solver.record_stride {
            if !(s > 0.0) {
                return Err(config_err("solver.record_stride must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n_points, self.grid.length)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        let c = &self.potential;
        let mut spec = match c.family {
            PotentialFamily::GaussianMatchedStep => PotentialSpec::gaussian_matched_step(2.0, 1.0),
            PotentialFamily::LogisticStep => PotentialSpec::logistic_step(1.0),
            PotentialFamily::Flat => PotentialSpec::flat(c.a_minus.or(c.a_plus).or(c.h).unwrap_or(0.0)),
            PotentialFamily::CustomSamples => {
                let path = c.csv.as_ref().ok_or_else(|| config_err("custom_samples needs potential.csv"))?;
                return Ok(PotentialSpec::custom(load_csv_table(&self.resolve(path))?));
            }
        };
        if c.family != PotentialFamily::Flat {
            if let Some(h) = c.h {
                spec.height = h;
            }
            if let Some(a) = c.a_minus {
                spec.a_minus = a;
            }
            if let Some(a) = c.a_plus {
                spec.a_plus = a;
            }
        } else if let (Some(a), Some(b)) = (c.a_minus, c.a_plus) {
            if a != b {
                return Err(config_err("flat potential needs a_minus = a_plus"));
            }
        }
        if let Some(w) = c.w {
            spec.width = w;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn potential(&self, grid: &Grid) -> Result<SampledPotential> {
        SampledPotential::from_spec(&self.potential_spec()?, grid)
    }

    pub fn initial_field(&self, grid: &Grid) -> Result<ComplexField> {
        let c = &self.initial;
        let (a, x0, w, k) = (c.amplitude, c.center, c.width, c.wavenumber);
        if c.shape != InitialShape::Checkpoint && c.shape != InitialShape::Zero && !(w > 0.0) {
            return Err(config_err("initial.width must be positive"));
        }
        match c.shape {
            InitialShape::Gaussian => ComplexField::from_fn(grid, |x| {
                let s = (x - x0) / w;
                Complex64::from_polar(a * (-s * s).exp(), k * x)
            }),
            InitialShape::Sech => ComplexField::from_fn(grid, |x| {
                Complex64::from_polar(a / ((x - x0) / w).cosh(), k * x)
            }),
            InitialShape::Zero => Ok(ComplexField::zeros(grid)),
            InitialShape::Checkpoint => {
                let path = c.path.as_ref().ok_or_else(|| config_err("initial.path missing"))?;
                let ck = read_checkpoint(&self.resolve(path))?;
                if ck.field.grid() != grid {
                    return Err(SnlsError::Dimension(format!(
                        "checkpoint grid ({}, {}) differs from config grid ({}, {})",
                        ck.field.grid().n_points(),
                        ck.field.grid().length(),
                        grid.n_points(),
                        grid.length()
                    )));
                }
                Ok(ck.field)
            }
        }
    }

    pub fn propagator(&self, grid: &Grid) -> Result<PerturbedPropagator> {
        PerturbedPropagator::new(grid, self.potential(grid)?, self.propagator.method, self.propagator.dt)
    }

    pub fn problem(&self, grid: &Grid) -> Result<NlsProblem> {
        let t_final = self.solver.t_final.ok_or_else(|| config_err("solver.t_final missing"))?;
        let mut prob = NlsProblem::new(
            grid,
            self.potential(grid)?,
            self.solver.alpha,
            self.initial_field(grid)?,
            self.solver.dt,
            t_final,
        );
        if let Some(s) = self.solver.record_stride {
            prob = prob.with_record_spacing(s);
        }
        if let Some(times) = &self.solver.record_times {
            let mut all = prob.record_times.clone();
            all.extend(times.iter().copied());
            all.sort_by(f64::total_cmp);
            all.dedup();
            prob = prob.with_record_times(all);
        }
        if self.solver.linear {
            prob = prob.linear();
        }
        if self.solver.permissive {
            prob = prob.permissive();
        }
        Ok(prob)
    }

    /// The config with one dotted key replaced, as used by sweeps.
    pub fn with_override(&self, dotted: &str, value: toml::Value, experiment: Experiment) -> Result<RunConfig> {
        let mut raw = self.raw.clone();
        raw.remove("sweep");
        raw.insert("experiment".into(), toml::Value::String(experiment.name().into()));
        let keys: Vec<&str> = dotted.split('.').collect();
        let (last, parents) = keys.split_last().ok_or_else(|| config_err("empty sweep parameter"))?;
        let mut table = &mut raw;
        for k in parents {
            let entry = table
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| config_err(format!("sweep parameter '{dotted}': '{k}' is not a table")))?;
        }
        table.insert(last.to_string(), value);
        let mut cfg = RunConfig::from_table(raw, &self.base_dir)?;
        cfg.output_dir = None;
        Ok(cfg)
    }
}
