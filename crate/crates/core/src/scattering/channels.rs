//! Free and shifted channels of the steplike linear flow.
//!
//! For large `t` the perturbed flow splits as
//! `e^{it(Δ-V)}ψ ≈ e^{itΔ}η + e^{it(Δ-1)}γ`. Pulling back with the free flow
//! at `t = 2πn` (where `e^{-it} = 1`) gives `η + γ`, and at `t = (2n+1)π`
//! (where `e^{-it} = -1`) gives `η - γ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::{nonlinear_wave_state_with, MissingSnapshot, WaveState};
use crate::error::{Result, SnlsError};
use crate::nls::Trajectory;
use crate::propagators::{evolve_free, evolve_shifted, PerturbedPropagator};
use crate::spectral::{h1_norm_sq, l2_norm_sq, raw_l2_norm_sq, ComplexField};

#[derive(Clone, Debug, Serialize)]
pub struct ChannelPair {
    #[serde(skip)]
    pub eta: ComplexField,
    #[serde(skip)]
    pub gamma: ComplexField,
    pub extraction_n: usize,
    /// `‖η(n) - η(n-1)‖_{H¹} + ‖γ(n) - γ(n-1)‖_{H¹}`; at `n = 1` the previous
    /// extraction is the `n = 0` one (`A₀ = ψ`, `B₀` at `t = π`).
    pub cauchy_gap: f64,
    /// `(‖η‖² + ‖γ‖² - ‖ψ‖²) / ‖ψ‖²`.
    pub mass_partition_defect: f64,
    /// `‖e^{it(Δ-V)}ψ - e^{itΔ}η - e^{it(Δ-1)}γ‖_{L²}` at `t = 2πn + π/2`,
    /// the quarter period where the two channels are out of phase by `i`.
    pub reconstruction_defect: f64,
    pub eta_norm: f64,
    pub gamma_norm: f64,
}

impl ChannelPair {
    /// `e^{itΔ}η + e^{it(Δ-1)}γ`.
    pub fn reconstruct(&self, t: f64) -> Result<ComplexField> {
        evolve_free(&self.eta, t)?.try_add(&evolve_shifted(&self.gamma, t)?)
    }
}

fn split(a: &ComplexField, b: &ComplexField) -> Result<(ComplexField, ComplexField)> {
    let half = Complex64::new(0.5, 0.0);
    Ok((a.try_add(b)?.scaled(half), a.try_sub(b)?.scaled(half)))
}

fn h1_distance(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    Ok(h1_norm_sq(&a.try_sub(b)?)?.sqrt())
}

/// Extractions for `n = 1..=n_max` along a single propagation.
///
/// The flow visits `kπ` for every `k ≤ 2 n_max + 1` and the quarter points
/// `(2n + ½)π`; [`extract_linear_channels`] follows the same path, so both give
/// bit-identical results.
pub fn linear_channel_sequence(p: &PerturbedPropagator, psi: &ComplexField, n_max: usize) -> Result<Vec<ChannelPair>> {
    if n_max == 0 {
        return Err(SnlsError::Parameter("extraction index n must be >= 1".into()));
    }
    p.grid().check_same(psi.grid(), "channel extraction")?;
    psi.validate()?;
    let mass = raw_l2_norm_sq(psi);

    // path: 0, π, 2π, 2.5π, 3π, 4π, 4.5π, 5π, ...
    let mut times = vec![PI];
    for n in 1..=n_max {
        let k = 2 * n;
        times.push(k as f64 * PI);
        times.push((k as f64 + 0.5) * PI);
        times.push((k + 1) as f64 * PI);
    }
    let evolved = p.evolve_sequence(psi, &times)?;

    let mut out = Vec::with_capacity(n_max);
    let b0 = evolve_free(&evolved[0], -times[0])?;
    let (mut prev_eta, mut prev_gamma) = split(psi, &b0)?;
    for n in 1..=n_max {
        let base = 1 + 3 * (n - 1);
        let a = evolve_free(&evolved[base], -times[base])?;
        let b = evolve_free(&evolved[base + 2], -times[base + 2])?;
        let (eta, gamma) = split(&a, &b)?;

        let t_quarter = times[base + 1];
        let recon = evolve_free(&eta, t_quarter)?.try_add(&evolve_shifted(&gamma, t_quarter)?)?;
        let reconstruction_defect = l2_norm_sq(&evolved[base + 1].try_sub(&recon)?)?.sqrt();

        let eta_mass = raw_l2_norm_sq(&eta);
        let gamma_mass = raw_l2_norm_sq(&gamma);
        let mass_partition_defect = if mass > 0.0 {
            (eta_mass + gamma_mass - mass) / mass
        } else {
            0.0
        };
        let cauchy_gap = h1_distance(&eta, &prev_eta)? + h1_distance(&gamma, &prev_gamma)?;
        out.push(ChannelPair {
            eta: eta.clone(),
            gamma: gamma.clone(),
            extraction_n: n,
            cauchy_gap,
            mass_partition_defect,
            reconstruction_defect,
            eta_norm: eta_mass.sqrt(),
            gamma_norm: gamma_mass.sqrt(),
        });
        prev_eta = eta;
        prev_gamma = gamma;
    }
    Ok(out)
}

/// Channel pair from the `n`-th extraction.
pub fn extract_linear_channels(p: &PerturbedPropagator, psi: &ComplexField, n: usize) -> Result<ChannelPair> {
    Ok(linear_channel_sequence(p, psi, n)?.pop().expect("n >= 1"))
}

#[derive(Clone, Debug, Serialize)]
pub struct NonlinearChannels {
    pub pair: ChannelPair,
    pub t: f64,
    /// `‖u(T) - e^{iTΔ}η - e^{iT(Δ-1)}γ‖_{L²}`.
    pub reconstruction_defect_l2: f64,
    pub reconstruction_defect_h1: f64,
    /// The L² defect divided by `‖u(T)‖_{L²}`.
    pub relative_defect: f64,
    #[serde(skip)]
    pub wave_state: WaveState,
}

/// Channels of the scattering state `ψ₊(T)` of a nonlinear run, and how well
/// they reproduce `u(T)`.
pub fn extract_nonlinear_channels(
    traj: &Trajectory,
    p: &PerturbedPropagator,
    t: f64,
    n: usize,
) -> Result<NonlinearChannels> {
    extract_nonlinear_channels_with(traj, p, t, n, MissingSnapshot::Error)
}

pub fn extract_nonlinear_channels_with(
    traj: &Trajectory,
    p: &PerturbedPropagator,
    t: f64,
    n: usize,
    missing: MissingSnapshot,
) -> Result<NonlinearChannels> {
    let wave_state = nonlinear_wave_state_with(traj, p, t, missing)?;
    let pair = extract_linear_channels(p, &wave_state.psi, n)?;
    let diff = wave_state.state.try_sub(&pair.reconstruct(t)?)?;
    let l2 = l2_norm_sq(&diff)?.sqrt();
    let norm = raw_l2_norm_sq(&wave_state.state).sqrt();
    Ok(NonlinearChannels {
        reconstruction_defect_h1: h1_norm_sq(&diff)?.sqrt(),
        reconstruction_defect_l2: l2,
        relative_defect: if norm > 0.0 { l2 / norm } else { 0.0 },
        pair,
        t,
        wave_state,
    })
}
