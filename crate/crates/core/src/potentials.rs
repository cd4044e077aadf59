//! Steplike potential families and finite-sample hypothesis checks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnlsError};
use crate::spectral::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `a_- + (h-a_-)e^{-x²/w²}` for `x ≤ 0`, `a_+ + (h-a_+)e^{-x²/w²}` for `x ≥ 0`.
    GaussianMatchedStep,
    /// `a_- + (a_+ - a_-) / (1 + e^{-x/w})`.
    LogisticStep,
    /// Constant `a_-` (requires `a_+ = a_-`).
    Flat,
    /// Linear interpolation of an `(x, V)` table.
    CustomSamples,
}

impl PotentialFamily {
    pub fn name(self) -> &'static str {
        match self {
            PotentialFamily::GaussianMatchedStep => "gaussian_matched_step",
            PotentialFamily::LogisticStep => "logistic_step",
            PotentialFamily::Flat => "flat",
            PotentialFamily::CustomSamples => "custom_samples",
        }
    }
}

impl fmt::Display for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PotentialFamily {
    type Err = SnlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_matched_step" => Ok(PotentialFamily::GaussianMatchedStep),
            "logistic_step" => Ok(PotentialFamily::LogisticStep),
            "flat" => Ok(PotentialFamily::Flat),
            "custom_samples" => Ok(PotentialFamily::CustomSamples),
            other => Err(SnlsError::Config(format!("unknown potential family '{other}'"))),
        }
    }
}

/// Parameters of a potential family.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    pub height: f64,
    pub width: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    /// `(x, V)` table for [`PotentialFamily::CustomSamples`], sorted by `x`.
    pub table: Vec<(f64, f64)>,
}

impl PotentialSpec {
    pub fn gaussian_matched_step(height: f64, width: f64) -> Self {
        PotentialSpec {
            family: PotentialFamily::GaussianMatchedStep,
            height,
            width,
            a_minus: 0.0,
            a_plus: 1.0,
            table: Vec::new(),
        }
    }

    pub fn logistic_step(width: f64) -> Self {
        PotentialSpec {
            family: PotentialFamily::LogisticStep,
            height: 1.0,
            width,
            a_minus: 0.0,
            a_plus: 1.0,
            table: Vec::new(),
        }
    }

    pub fn flat(value: f64) -> Self {
        PotentialSpec {
            family: PotentialFamily::Flat,
            height: value,
            width: 1.0,
            a_minus: value,
            a_plus: value,
            table: Vec::new(),
        }
    }

    pub fn custom(table: Vec<(f64, f64)>) -> Self {
        let a_minus = table.first().map(|p| p.1).unwrap_or(0.0);
        let a_plus = table.last().map(|p| p.1).unwrap_or(0.0);
        PotentialSpec {
            family: PotentialFamily::CustomSamples,
            height: table.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
            width: 1.0,
            a_minus,
            a_plus,
            table,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.height, self.width, self.a_minus, self.a_plus]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SnlsError::Parameter("non-finite potential parameter".into()));
        }
        match self.family {
            PotentialFamily::GaussianMatchedStep => {
                if self.width <= 0.0 {
                    return Err(SnlsError::Parameter(format!(
                        "width must be positive, got {}",
                        self.width
                    )));
                }
                if self.height < self.a_plus || self.height < self.a_minus {
                    return Err(SnlsError::Parameter(format!(
                        "height {} below a limit (a_-={}, a_+={}): repulsivity would fail",
                        self.height, self.a_minus, self.a_plus
                    )));
                }
            }
            PotentialFamily::LogisticStep => {
                if self.width <= 0.0 {
                    return Err(SnlsError::Parameter(format!(
                        "width must be positive, got {}",
                        self.width
                    )));
                }
            }
            PotentialFamily::Flat => {
                if self.a_plus != self.a_minus {
                    return Err(SnlsError::Parameter(
                        "flat potential needs a_plus == a_minus".into(),
                    ));
                }
            }
            PotentialFamily::CustomSamples => {
                if self.table.len() < 2 {
                    return Err(SnlsError::Parameter(
                        "custom potential needs at least two samples".into(),
                    ));
                }
                if self.table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(SnlsError::Parameter(
                        "custom potential x column must be strictly increasing".into(),
                    ));
                }
                if self.table.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
                    return Err(SnlsError::Parameter("non-finite custom sample".into()));
                }
            }
        }
        Ok(())
    }

    fn value_at(&self, x: f64) -> f64 {
        match self.family {
            PotentialFamily::GaussianMatchedStep => {
                let g = (-(x * x) / (self.width * self.width)).exp();
                if x < 0.0 {
                    self.a_minus + (self.height - self.a_minus) * g
                } else if self.height == self.a_plus {
                    self.a_plus
                } else {
                    self.a_plus + (self.height - self.a_plus) * g
                }
            }
            PotentialFamily::LogisticStep => {
                self.a_minus + (self.a_plus - self.a_minus) / (1.0 + (-x / self.width).exp())
            }
            PotentialFamily::Flat => self.a_minus,
            PotentialFamily::CustomSamples => interpolate(&self.table, x),
        }
    }

    fn derivative_at(&self, x: f64) -> Option<f64> {
        match self.family {
            PotentialFamily::GaussianMatchedStep => {
                let w2 = self.width * self.width;
                let g = (-(x * x) / w2).exp();
                let amp = if x < 0.0 {
                    self.height - self.a_minus
                } else {
                    self.height - self.a_plus
                };
                Some(-2.0 * x / w2 * amp * g)
            }
            PotentialFamily::LogisticStep => {
                let e = (-x / self.width).exp();
                let d = (self.a_plus - self.a_minus) * e / (self.width * (1.0 + e) * (1.0 + e));
                Some(if d.is_finite() { d } else { 0.0 })
            }
            PotentialFamily::Flat => Some(0.0),
            PotentialFamily::CustomSamples => None,
        }
    }
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = table.partition_point(|p| p.0 <= x);
    let (x0, v0) = table[i - 1];
    let (x1, v1) = table[i];
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

/// Samples of `V` at the grid points.
pub fn build_potential(spec: &PotentialSpec, grid: &Grid) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(grid.x().iter().map(|&x| spec.value_at(x)).collect())
}

/// Potential samples together with `∂_x V` on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPotential {
    values: Vec<f64>,
    gradient: Vec<f64>,
}

impl SampledPotential {
    /// Uses the closed-form derivative where the family has one.
    pub fn from_spec(spec: &PotentialSpec, grid: &Grid) -> Result<Self> {
        let values = build_potential(spec, grid)?;
        let gradient = match spec.derivative_at(0.0) {
            Some(_) => grid
                .x()
                .iter()
                .map(|&x| spec.derivative_at(x).unwrap_or(0.0))
                .collect(),
            None => finite_difference_gradient(&values, grid.dx()),
        };
        Ok(SampledPotential { values, gradient })
    }

    /// Gradient by fourth-order finite differences (non-periodic).
    pub fn from_samples(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len(), "potential samples")?;
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(SnlsError::Parameter(format!("non-finite potential at index {j}")));
        }
        let gradient = finite_difference_gradient(&values, grid.dx());
        Ok(SampledPotential { values, gradient })
    }

    pub fn zero(grid: &Grid) -> Self {
        SampledPotential {
            values: vec![0.0; grid.n_points()],
            gradient: vec![0.0; grid.n_points()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        SampledPotential {
            values: vec![value; grid.n_points()],
            gradient: vec![0.0; grid.n_points()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn finite_difference_gradient(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|j| {
            if j >= 2 && j + 2 < n {
                (-v[j + 2] + 8.0 * v[j + 1] - 8.0 * v[j - 1] + v[j - 2]) / (12.0 * dx)
            } else if j >= 1 && j + 1 < n {
                (v[j + 1] - v[j - 1]) / (2.0 * dx)
            } else if j == 0 {
                (v[1] - v[0]) / dx
            } else {
                (v[j] - v[j - 1]) / dx
            }
        })
        .collect()
}

/// Second-order centred difference with one-sided ends.
pub fn centered_difference(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|j| {
            if j == 0 {
                (v[1] - v[0]) / dx
            } else if j + 1 == n {
                (v[j] - v[j - 1]) / dx
            } else {
                (v[j + 1] - v[j - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Expected asymptotics and the decay margin `ε` of `|x|^{1+ε}|V - a_±| → 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisTargets {
    pub a_minus: f64,
    pub a_plus: f64,
    pub epsilon: f64,
}

impl Default for HypothesisTargets {
    fn default() -> Self {
        HypothesisTargets {
            a_minus: 0.0,
            a_plus: 1.0,
            epsilon: 0.1,
        }
    }
}

pub const LIMIT_TOL: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub location: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub nonnegative: bool,
    pub bounded: bool,
    pub left_limit_ok: bool,
    pub right_limit_ok: bool,
    pub decay_rate_ok: bool,
    /// Smallest fitted power-law exponent of `|V - a_±|` over the outer
    /// quarters; infinite when the limit is attained exactly.
    pub decay_exponent: f64,
    pub repulsive: bool,
    pub gradient_vanishes: bool,
    /// Largest value of `x·V'(x)` and where it occurs.
    pub worst_violation: Violation,
}

impl HypothesisReport {
    pub fn all_ok(&self) -> bool {
        self.nonnegative
            && self.bounded
            && self.left_limit_ok
            && self.right_limit_ok
            && self.decay_rate_ok
            && self.repulsive
            && self.gradient_vanishes
    }
}

/// Finite-sample checks of the steplike-potential hypotheses.
///
/// `V'` is the centred difference of the samples; repulsivity allows
/// `x·V' ≤ 1e-10·max|V|`.
pub fn check_hypotheses(v: &[f64], grid: &Grid, targets: &HypothesisTargets) -> HypothesisReport {
    let n = v.len().min(grid.n_points());
    let x = &grid.x()[..n];
    let v = &v[..n];
    let bounded = v.iter().all(|s| s.is_finite());
    let nonnegative = bounded && v.iter().all(|&s| s >= -1e-14);
    let scale = v.iter().map(|s| s.abs()).fold(0.0, f64::max);
    let dv = centered_difference(v, grid.dx());

    let (worst_j, worst) = x
        .iter()
        .zip(&dv)
        .map(|(&xj, &d)| xj * d)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, val)| {
            if val > acc.1 {
                (j, val)
            } else {
                acc
            }
        });
    let tol = 1e-10 * scale.max(1e-300);
    let repulsive = bounded && worst <= tol;

    let left_limit_ok = (v[0] - targets.a_minus).abs() <= LIMIT_TOL;
    let right_limit_ok = (v[n - 1] - targets.a_plus).abs() <= LIMIT_TOL;

    let edge = (n / 20).max(1);
    let gradient_vanishes = dv[..edge]
        .iter()
        .chain(&dv[n - edge..])
        .all(|d| d.abs() <= GRADIENT_TOL);

    // outer 25% of each half-domain
    let quarter = n / 8;
    let left: Vec<(f64, f64)> = (0..quarter)
        .rev()
        .map(|j| (x[j].abs(), (v[j] - targets.a_minus).abs()))
        .collect();
    let right: Vec<(f64, f64)> = (n - quarter..n)
        .map(|j| (x[j].abs(), (v[j] - targets.a_plus).abs()))
        .collect();
    let (left_ok, left_exp) = decay_check(&left, targets.epsilon);
    let (right_ok, right_exp) = decay_check(&right, targets.epsilon);

    HypothesisReport {
        nonnegative,
        bounded,
        left_limit_ok,
        right_limit_ok,
        decay_rate_ok: bounded && left_ok && right_ok,
        decay_exponent: left_exp.min(right_exp),
        repulsive,
        gradient_vanishes,
        worst_violation: Violation {
            location: x[worst_j],
            value: worst,
        },
    }
}

/// `samples` are `(|x|, |V - a|)` ordered by increasing `|x|`.
fn decay_check(samples: &[(f64, f64)], epsilon: f64) -> (bool, f64) {
    let weighted: Vec<f64> = samples
        .iter()
        .map(|&(ax, d)| ax.powf(1.0 + epsilon) * d)
        .collect();
    let peak = weighted.iter().copied().fold(0.0, f64::max);
    let monotone = weighted
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-14 * peak.max(1e-300));
    let tail_small = weighted.last().map(|&w| w <= LIMIT_TOL).unwrap_or(false);

    // least-squares slope of ln|V - a| against ln|x|
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(ax, d)| ax > 0.0 && d > 0.0 && d.is_finite())
        .map(|&(ax, d)| (ax.ln(), d.ln()))
        .collect();
    let exponent = if pts.len() < 2 {
        f64::INFINITY
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx == 0.0 {
            f64::INFINITY
        } else {
            -sxy / sxx
        }
    };
    (monotone && tail_small, exponent)
}

/// Reads a two-column `x,V` CSV. A non-numeric first row is treated as a header.
pub fn load_csv_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut table = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() < 2 {
            return Err(SnlsError::Config(format!(
                "{}: row {} needs two columns",
                path.display(),
                row + 1
            )));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(v)) => table.push((x, v)),
            _ if row == 0 => continue,
            _ => {
                return Err(SnlsError::Config(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    row + 1
                )))
            }
        }
    }
    Ok(table)
}

fn csv_error(path: &Path, e: csv::Error) -> SnlsError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => SnlsError::Io(io),
            other => SnlsError::Config(format!("{}: {other:?}", path.display())),
        }
    } else {
        SnlsError::Config(format!("{}: {e}", path.display()))
    }
}
