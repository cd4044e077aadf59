//! Asymptotic analysis: wave operators, double-channel extraction,
//! translation limits of the perturbed flow and profile decomposition.

pub mod channels;
pub mod profiles;
pub mod translation;

pub use channels::{
    extract_linear_channels, extract_nonlinear_channels, extract_nonlinear_channels_with, linear_channel_sequence, ChannelPair,
    NonlinearChannels,
};
pub use profiles::{
    greedy_profile_decomposition, Profile, ProfileEstimator, ProfileOptions, ProfileSet, PythagoreanDefects,
};
pub use translation::{translation_flow_gap, TranslationGapOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnlsError};
use crate::nls::{evolve_nls, Trajectory, Warning};
use crate::propagators::PerturbedPropagator;
use crate::spectral::{h1_norm_sq, ComplexField};

/// What to do when no snapshot sits at the requested time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingSnapshot {
    #[default]
    Error,
    /// Re-integrate the nonlinear equation from the latest earlier snapshot.
    Integrate,
}

#[derive(Clone, Debug)]
pub struct WaveState {
    pub t: f64,
    /// `ψ₊(T) = e^{-iT(Δ-V)} u(T)`.
    pub psi: ComplexField,
    /// `u(T)` itself.
    pub state: ComplexField,
    pub warnings: Vec<Warning>,
}

pub fn nonlinear_wave_state(traj: &Trajectory, p: &PerturbedPropagator, t: f64) -> Result<WaveState> {
    nonlinear_wave_state_with(traj, p, t, MissingSnapshot::Error)
}

pub fn nonlinear_wave_state_with(
    traj: &Trajectory,
    p: &PerturbedPropagator,
    t: f64,
    missing: MissingSnapshot,
) -> Result<WaveState> {
    p.grid().check_same(&traj.problem.grid, "wave state")?;
    let t_final = traj.final_snapshot().t;
    if !(t >= 0.0) || t > t_final * (1.0 + 1e-12) {
        return Err(SnlsError::Parameter(format!(
            "wave-state time {t} outside [0, {t_final}]"
        )));
    }
    let mut warnings = Vec::new();
    let state = match traj.snapshot_at(t) {
        Some(s) => s.field.clone(),
        None => match missing {
            MissingSnapshot::Error => {
                return Err(SnlsError::InsufficientData(format!("no snapshot at t={t}")))
            }
            MissingSnapshot::Integrate => {
                let base = traj
                    .snapshots
                    .iter()
                    .filter(|s| s.t <= t)
                    .last()
                    .expect("t >= 0 and the first snapshot is at 0");
                warnings.push(Warning::InterpolatedSnapshot { t });
                let prob = &traj.problem;
                evolve_nls(&base.field, &prob.potential, prob.nonlinearity(), prob.dt, t - base.t)?
            }
        },
    };
    let psi = p.evolve(&state, -t)?;
    Ok(WaveState {
        t,
        psi,
        state,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WaveOperatorGaps {
    pub times: Vec<f64>,
    /// `‖ψ₊(T_{k+1}) - ψ₊(T_k)‖_{H¹}` for consecutive requested times.
    pub h1_gaps: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<WaveState>,
}

impl WaveOperatorGaps {
    pub fn is_decreasing(&self) -> bool {
        self.h1_gaps.windows(2).all(|w| w[1] < w[0])
    }
}

/// Pulled-back states at each time and the H¹ distances between neighbours.
pub fn wave_operator_gaps(traj: &Trajectory, p: &PerturbedPropagator, times: &[f64]) -> Result<WaveOperatorGaps> {
    if times.is_empty() {
        return Err(SnlsError::EmptyInput("no wave-operator times".into()));
    }
    let states = times
        .iter()
        .map(|&t| nonlinear_wave_state(traj, p, t))
        .collect::<Result<Vec<_>>>()?;
    let h1_gaps = states
        .windows(2)
        .map(|w| Ok(h1_norm_sq(&w[1].psi.try_sub(&w[0].psi)?)?.sqrt()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(WaveOperatorGaps {
        times: times.to_vec(),
        h1_gaps,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nls::{solve, NlsProblem};
    use crate::potentials::{PotentialSpec, SampledPotential};
    use crate::spectral::{l2_norm_sq, Grid};

    fn step(g: &Grid) -> SampledPotential {
        SampledPotential::from_spec(&PotentialSpec::gaussian_matched_step(2.0, 1.0), g).unwrap()
    }

    #[test]
    fn zero_solution_zero_state() {
        let g = Grid::new(128, 40.0).unwrap();
        let prob = NlsProblem::new(&g, step(&g), 5.0, ComplexField::zeros(&g), 1e-2, 2.0);
        let traj = solve(&prob).unwrap();
        let p = PerturbedPropagator::strang(&g, step(&g), 1e-2).unwrap();
        assert!(nonlinear_wave_state(&traj, &p, 2.0).unwrap().psi.is_zero());
    }

    #[test]
    fn linear_run_pulls_back_to_datum() {
        let g = Grid::new(256, 40.0).unwrap();
        let u0 = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let dt = 1e-2;
        let prob = NlsProblem::new(&g, step(&g), 5.0, u0.clone(), dt, 2.0)
            .linear()
            .with_record_spacing(0.5);
        let traj = solve(&prob).unwrap();
        let p = PerturbedPropagator::strang(&g, step(&g), dt).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let w = nonlinear_wave_state(&traj, &p, t).unwrap();
            let d = l2_norm_sq(&w.psi.try_sub(&u0).unwrap()).unwrap().sqrt();
            assert!(d < 1e-12, "t={t}: {d}");
        }
    }

    #[test]
    fn missing_snapshot_policy() {
        let g = Grid::new(128, 40.0).unwrap();
        let u0 = ComplexField::from_real_fn(&g, |x| 0.3 * (-x * x).exp()).unwrap();
        let prob = NlsProblem::new(&g, step(&g), 5.0, u0, 1e-2, 2.0).with_record_spacing(0.5);
        let traj = solve(&prob).unwrap();
        let p = PerturbedPropagator::strang(&g, step(&g), 1e-2).unwrap();
        assert!(matches!(
            nonlinear_wave_state(&traj, &p, 0.75),
            Err(SnlsError::InsufficientData(_))
        ));
        let w = nonlinear_wave_state_with(&traj, &p, 0.75, MissingSnapshot::Integrate).unwrap();
        assert_eq!(w.warnings, vec![Warning::InterpolatedSnapshot { t: 0.75 }]);
        assert!(nonlinear_wave_state(&traj, &p, 3.0).is_err());
    }

    #[test]
    fn wave_operator_gaps_shrink_for_moderate_data() {
        let g = Grid::new(2048, 400.0).unwrap();
        let u0 = ComplexField::from_real_fn(&g, |x| 0.5 * (-x * x).exp()).unwrap();
        let prob = NlsProblem::new(&g, step(&g), 5.0, u0, 2e-3, 40.0).with_record_times(vec![10.0, 20.0, 40.0]);
        let traj = solve(&prob).unwrap();
        let p = PerturbedPropagator::strang(&g, step(&g), 2e-3).unwrap();
        let gaps = wave_operator_gaps(&traj, &p, &[10.0, 20.0, 40.0]).unwrap();
        assert!(gaps.is_decreasing(), "{:?}", gaps.h1_gaps);
    }
}
