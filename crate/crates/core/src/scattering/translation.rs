//! Far-translated data see only one side of the step.

use serde::Serialize;

use crate::diagnostics::{exponents, space_time_norm};
use crate::error::{Result, SnlsError};
use crate::nls::uniform_times;
use crate::propagators::{evolve_free, evolve_shifted, PerturbedPropagator};
use crate::spectral::{translate, ComplexField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TranslationGapOptions {
    pub time_exponent: f64,
    pub space_exponent: f64,
    /// Spacing of the time samples used by the trapezoid rule.
    pub sample_spacing: f64,
}

impl TranslationGapOptions {
    /// The `(p, r)` pair attached to `α`.
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        let e = exponents(alpha)?;
        Ok(TranslationGapOptions {
            time_exponent: e.p,
            space_exponent: e.r,
            sample_spacing: 0.05,
        })
    }
}

impl Default for TranslationGapOptions {
    fn default() -> Self {
        TranslationGapOptions::for_alpha(5.0).expect("alpha = 5 is admissible")
    }
}

/// Space-time distance between the perturbed flow of `τ_x ψ` and the flat flow
/// it should approach: free for `x ≤ 0`, shifted for `x > 0`.
///
/// Errors with a domain error when `|x| ≥ L/4`.
pub fn translation_flow_gap(
    p: &PerturbedPropagator,
    psi: &ComplexField,
    x_shift: f64,
    t_span: (f64, f64),
    opts: &TranslationGapOptions,
) -> Result<f64> {
    let length = p.grid().length();
    if !x_shift.is_finite() || x_shift.abs() >= 0.25 * length {
        return Err(SnlsError::Domain(format!(
            "|x_shift| = {} must stay below L/4 = {}",
            x_shift.abs(),
            0.25 * length
        )));
    }
    let (t0, t1) = t_span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(SnlsError::Parameter(format!("bad time span [{t0}, {t1}]")));
    }
    if !(opts.sample_spacing > 0.0) {
        return Err(SnlsError::Parameter("sample spacing must be positive".into()));
    }
    p.grid().check_same(psi.grid(), "translation gap")?;
    let shifted = translate(psi, x_shift)?;
    let times = uniform_times(t0, t1, opts.sample_spacing);
    let perturbed = p.evolve_sequence(&shifted, &times)?;
    let diffs = times
        .iter()
        .zip(&perturbed)
        .map(|(&t, u)| {
            let flat = if x_shift <= 0.0 {
                evolve_free(&shifted, t)?
            } else {
                evolve_shifted(&shifted, t)?
            };
            flat.try_sub(u)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ComplexField> = diffs.iter().collect();
    Ok(space_time_norm(&times, &refs, opts.time_exponent, opts.space_exponent)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{PotentialSpec, SampledPotential};
    use crate::spectral::Grid;

    #[test]
    fn flat_potential_has_no_gap() {
        let g = Grid::new(512, 100.0).unwrap();
        let psi = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let p = PerturbedPropagator::strang(&g, SampledPotential::zero(&g), 1e-2).unwrap();
        let gap = translation_flow_gap(&p, &psi, -10.0, (0.0, 2.0), &TranslationGapOptions::default()).unwrap();
        assert!(gap < 1e-12, "{gap}");
        let p1 = PerturbedPropagator::strang(&g, SampledPotential::constant(&g, 1.0), 1e-2).unwrap();
        let gap = translation_flow_gap(&p1, &psi, 10.0, (0.0, 2.0), &TranslationGapOptions::default()).unwrap();
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn domain_limit_enforced() {
        let g = Grid::new(256, 100.0).unwrap();
        let psi = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let p = PerturbedPropagator::strang(&g, SampledPotential::zero(&g), 1e-2).unwrap();
        let opts = TranslationGapOptions::default();
        assert!(matches!(
            translation_flow_gap(&p, &psi, 25.0, (0.0, 1.0), &opts),
            Err(SnlsError::Domain(_))
        ));
        assert!(translation_flow_gap(&p, &psi, -24.9, (0.0, 1.0), &opts).is_ok());
    }

    #[test]
    fn gap_shrinks_with_distance() {
        let g = Grid::new(2048, 256.0).unwrap();
        let v = SampledPotential::from_spec(&PotentialSpec::gaussian_matched_step(2.0, 1.0), &g).unwrap();
        let p = PerturbedPropagator::strang(&g, v, 1e-2).unwrap();
        let psi = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let opts = TranslationGapOptions::default();
        for sign in [-1.0, 1.0] {
            let gaps: Vec<f64> = [10.0, 20.0, 40.0]
                .iter()
                .map(|d| translation_flow_gap(&p, &psi, sign * d, (0.0, 5.0), &opts).unwrap())
                .collect();
            assert!(gaps[2] < gaps[1] && gaps[1] < gaps[0], "{sign}: {gaps:?}");
        }
    }
}
