//! Conserved quantities, Strichartz exponents and space-time norms.

pub mod morawetz;

use serde::Serialize;

use crate::error::{Result, SnlsError};
use crate::nls::{Trajectory, Warning};
use crate::propagators::PerturbedPropagator;
use crate::spectral::{
    boundary_mass_fraction, dirichlet_norm_sq, l2_norm_sq, lp_norm, lp_norm_pow, sup_norm,
    ComplexField,
};

pub use morawetz::{morawetz_report, morawetz_report_with, MorawetzOptions, MorawetzReport, TimeDerivative};

/// Tolerance on the admissibility relation `2/a = 1/2 - 1/b`.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;
/// Snapshot density below which space-time norms carry a coverage warning.
pub const MIN_SNAPSHOTS_PER_UNIT_TIME: f64 = 10.0;

pub fn mass(f: &ComplexField) -> Result<f64> {
    l2_norm_sq(f)
}

/// `∫ V|f|² dx`.
pub fn potential_energy(f: &ComplexField, v: &[f64]) -> Result<f64> {
    f.grid().check_len(v.len(), "potential")?;
    Ok(f
        .values()
        .iter()
        .zip(v)
        .map(|(u, &p)| p * u.norm_sqr())
        .sum::<f64>()
        * f.grid().dx())
}

/// `½ ∫ |∂f|² + V|f|² + (2/(α+2)) |f|^{α+2} dx`.
pub fn energy(f: &ComplexField, v: &[f64], alpha: f64) -> Result<f64> {
    energy_with(f, v, Some(alpha))
}

/// Energy with an optional nonlinearity; `None` gives the linear energy.
pub fn energy_with(f: &ComplexField, v: &[f64], alpha: Option<f64>) -> Result<f64> {
    let kinetic = dirichlet_norm_sq(f)?;
    let pot = potential_energy(f, v)?;
    let nl = match alpha {
        Some(a) => {
            if !(a > 0.0) {
                return Err(SnlsError::Range(format!("alpha must be positive, got {a}")));
            }
            2.0 / (a + 2.0) * lp_norm_pow(f, a + 2.0)
        }
        None => 0.0,
    };
    Ok(0.5 * (kinetic + pot + nl))
}

/// `∫ |∂f|² + V|f|² dx`.
pub fn h1v_norm_sq(f: &ComplexField, v: &[f64]) -> Result<f64> {
    Ok(dirichlet_norm_sq(f)? + potential_energy(f, v)?)
}

/// `(M · 2E)^{1/4}`: a sup-norm bound from `‖u‖²_∞ ≤ ‖u‖‖u'‖` and
/// `‖u'‖² ≤ 2E`, valid whenever `V ≥ 0`.
pub fn gagliardo_nirenberg_sup_bound(mass: f64, energy: f64) -> f64 {
    (mass * 2.0 * energy).max(0.0).powf(0.25)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub alpha: f64,
    pub r: f64,
    pub p: f64,
    pub q: f64,
    /// Hölder conjugate of `q`.
    pub q_prime: f64,
    pub exploratory: bool,
}

/// The exponent triple `(r, p, q)` attached to `α` in one dimension.
///
/// Requires `α > 4`.
pub fn exponents(alpha: f64) -> Result<ExponentSet> {
    if !(alpha > 4.0) || !alpha.is_finite() {
        return Err(SnlsError::Range(format!(
            "exponents need alpha > 4, got {alpha}"
        )));
    }
    Ok(raw_exponents(alpha, false))
}

/// Like [`exponents`] but accepts `α ∈ (α₀, 4]`, where `α₀ = (√17 - 1)/2` keeps
/// `q` finite and positive; the result is flagged exploratory.
pub fn exponents_permissive(alpha: f64) -> Result<ExponentSet> {
    if alpha > 4.0 {
        return exponents(alpha);
    }
    let alpha0 = (17f64.sqrt() - 1.0) / 2.0;
    if !(alpha > alpha0) {
        return Err(SnlsError::Range(format!(
            "alpha = {alpha} leaves q undefined (need alpha > {alpha0:.6})"
        )));
    }
    Ok(raw_exponents(alpha, true))
}

fn raw_exponents(alpha: f64, exploratory: bool) -> ExponentSet {
    let r = alpha + 2.0;
    let p = 2.0 * alpha * (alpha + 2.0) / (4.0 + alpha);
    let q = 2.0 * alpha * (alpha + 2.0) / (alpha * alpha + alpha - 4.0);
    ExponentSet {
        alpha,
        r,
        p,
        q,
        q_prime: q / (q - 1.0),
        exploratory,
    }
}

/// A time/space exponent pair; `a = ∞` is allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrichartzPair {
    pub a: f64,
    pub b: f64,
}

impl StrichartzPair {
    pub fn new(a: f64, b: f64) -> Self {
        StrichartzPair { a, b }
    }

    /// The pair with time exponent determined by `b` through `2/a = 1/2 - 1/b`.
    pub fn admissible_for(b: f64) -> Result<Self> {
        if !(b >= 2.0) {
            return Err(SnlsError::Range(format!("space exponent {b} < 2")));
        }
        let inv = 0.5 - 1.0 / b;
        let a = if inv == 0.0 { f64::INFINITY } else { 2.0 / inv };
        Ok(StrichartzPair { a, b })
    }

    pub fn is_admissible(&self) -> bool {
        if !(self.a >= 4.0 && self.b >= 2.0) {
            return false;
        }
        let lhs = if self.a.is_infinite() { 0.0 } else { 2.0 / self.a };
        let rhs = 0.5 - if self.b.is_infinite() { 0.0 } else { 1.0 / self.b };
        (lhs - rhs).abs() <= ADMISSIBILITY_TOL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpaceTimeNorm {
    pub value: f64,
    pub admissible: bool,
    pub warnings: Vec<Warning>,
}

/// `‖u‖_{L^a_t L^b_x}` over a trajectory's snapshots (trapezoid rule in time,
/// maximum when `a = ∞`).
pub fn strichartz_norm(traj: &Trajectory, a: f64, b: f64) -> Result<SpaceTimeNorm> {
    let times = traj.times();
    let fields: Vec<&ComplexField> = traj.snapshots.iter().map(|s| &s.field).collect();
    space_time_norm(&times, &fields, a, b)
}

/// Space-time norm of sampled fields at the given (sorted) times.
pub fn space_time_norm(times: &[f64], fields: &[&ComplexField], a: f64, b: f64) -> Result<SpaceTimeNorm> {
    if times.len() != fields.len() {
        return Err(SnlsError::Dimension(format!(
            "{} times for {} fields",
            times.len(),
            fields.len()
        )));
    }
    if times.is_empty() {
        return Err(SnlsError::EmptyInput("no snapshots".into()));
    }
    if !(a >= 1.0) || !(b >= 1.0) {
        return Err(SnlsError::Parameter(format!("exponents must be >= 1, got ({a}, {b})")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SnlsError::Parameter("times must be strictly increasing".into()));
    }
    let admissible = StrichartzPair::new(a, b).is_admissible();
    let spatial = fields
        .iter()
        .map(|f| lp_norm(f, b))
        .collect::<Result<Vec<f64>>>()?;
    let mut warnings = Vec::new();
    if a.is_infinite() {
        return Ok(SpaceTimeNorm {
            value: spatial.iter().copied().fold(0.0, f64::max),
            admissible,
            warnings,
        });
    }
    if times.len() < 2 {
        return Err(SnlsError::InsufficientData(
            "a finite time exponent needs at least two snapshots".into(),
        ));
    }
    let span = times[times.len() - 1] - times[0];
    let density = (times.len() - 1) as f64 / span;
    if density < MIN_SNAPSHOTS_PER_UNIT_TIME {
        warnings.push(Warning::Coverage {
            snapshots_per_unit_time: density,
        });
    }
    let powered: Vec<f64> = spatial.iter().map(|s| s.powf(a)).collect();
    Ok(SpaceTimeNorm {
        value: trapezoid(times, &powered).powf(1.0 / a),
        admissible,
        warnings,
    })
}

pub(crate) fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRatioSeries {
    pub times: Vec<f64>,
    /// `|t|^{1/2} ‖e^{it(Δ-V)}ψ‖_∞ / ‖ψ‖_{L¹}`.
    pub ratios: Vec<f64>,
    pub boundary_fractions: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl DecayRatioSeries {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Dispersive decay ratio at each requested nonzero time.
pub fn decay_ratio(p: &PerturbedPropagator, psi: &ComplexField, times: &[f64]) -> Result<DecayRatioSeries> {
    if times.is_empty() {
        return Err(SnlsError::EmptyInput("no times requested".into()));
    }
    if times.iter().any(|t| *t == 0.0 || !t.is_finite()) {
        return Err(SnlsError::Parameter("decay times must be finite and nonzero".into()));
    }
    let l1 = crate::spectral::l1_norm(psi)?;
    if l1 == 0.0 {
        return Err(SnlsError::InvalidField("zero datum has no decay ratio".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let mut ratios = vec![0.0; times.len()];
    let mut fractions = vec![0.0; times.len()];
    let mut warnings = Vec::new();
    // sequential legs on each side of zero
    for positive in [false, true] {
        let idx: Vec<usize> = if positive {
            order.iter().copied().filter(|&i| times[i] > 0.0).collect()
        } else {
            order.iter().rev().copied().filter(|&i| times[i] < 0.0).collect()
        };
        let ts: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
        let fields = p.evolve_sequence(psi, &ts)?;
        for (&i, f) in idx.iter().zip(&fields) {
            ratios[i] = times[i].abs().sqrt() * sup_norm(f) / l1;
            fractions[i] = boundary_mass_fraction(f);
            if fractions[i] > crate::nls::WRAP_WARNING_FRACTION
                && !warnings.iter().any(|w| matches!(w, Warning::WrapAround { .. }))
            {
                warnings.push(Warning::WrapAround {
                    t: times[i],
                    boundary_fraction: fractions[i],
                });
            }
        }
    }
    Ok(DecayRatioSeries {
        times: times.to_vec(),
        ratios,
        boundary_fractions: fractions,
        warnings,
    })
}
