//! Local Morawetz density, its integral and the pointwise identity residual.
//!
//! With `λ = √(t² + x²)`, `a = -2x/λ` and `g = -t²/λ³ - it/λ`, the multiplier
//! `m = a u_x + g u` applied to the equation gives, for smooth solutions,
//!
//! ```text
//! 0 = ½∂_t B + ∂_x F + t²G/λ³ + ½|u|² Re g_xx + |2it u_x + x u|²/(2λ³) - xV'|u|²/λ
//! ```
//!
//! where `B = -(2x/λ) Im(ū u_x) - t|u|²/λ`, `G = α/(α+2) |u|^{α+2}` and
//! `F = Re(u_x m̄) - a l_V - ½|u|² Re g_x`. The residual reported here is the
//! L¹ norm in `x` of the right-hand side.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::trapezoid;
use crate::error::{Result, SnlsError};
use crate::nls::Trajectory;
use crate::spectral::{spectral_derivative, ComplexField};

/// How `∂_t` is obtained for the residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDerivative {
    /// Second-order differences of neighbouring snapshots.
    #[default]
    SnapshotDifference,
    /// `u_t` from the equation itself; the residual then only tests the
    /// spatial discretisation.
    EquationRhs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MorawetzOptions {
    pub time_derivative: TimeDerivative,
    /// Snapshots with `t < t_min` are ignored.
    pub t_min: f64,
}

impl Default for MorawetzOptions {
    fn default() -> Self {
        MorawetzOptions {
            time_derivative: TimeDerivative::SnapshotDifference,
            t_min: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorawetzReport {
    pub times: Vec<f64>,
    /// `∫ t²|u|^{α+2}/λ³ dx` at each time.
    pub density_series: Vec<f64>,
    /// `∫ (-xV') |u|²/λ dx` at each time.
    pub repulsive_term_series: Vec<f64>,
    /// Trapezoid integral of the density over `times`.
    pub integral_value: f64,
    /// Times at which the residual is available.
    pub residual_times: Vec<f64>,
    pub identity_residual_series: Vec<f64>,
}

impl MorawetzReport {
    pub fn max_residual(&self) -> f64 {
        self.identity_residual_series
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

pub fn morawetz_report(traj: &Trajectory) -> Result<MorawetzReport> {
    morawetz_report_with(traj, &MorawetzOptions::default())
}

/// Pointwise quantities at one time.
struct Frame {
    t: f64,
    u: Vec<Complex64>,
    ux: Vec<Complex64>,
}

struct Context<'a> {
    x: &'a [f64],
    v: &'a [f64],
    dv: &'a [f64],
    alpha: f64,
    nonlinear: bool,
    dx: f64,
}

impl Context<'_> {
    fn frame(&self, t: f64, f: &ComplexField) -> Result<Frame> {
        Ok(Frame {
            t,
            u: f.values().to_vec(),
            ux: spectral_derivative(f)?.into_values(),
        })
    }

    fn nl_power(&self, s: f64) -> f64 {
        if self.nonlinear {
            s.powf(0.5 * self.alpha)
        } else {
            0.0
        }
    }

    /// `B` from the module docs.
    fn b_density(&self, fr: &Frame) -> Vec<f64> {
        let t = fr.t;
        self.x
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let lam = (t * t + x * x).sqrt();
                let u = fr.u[j];
                -(2.0 * x / lam) * (u.conj() * fr.ux[j]).im - t * u.norm_sqr() / lam
            })
            .collect()
    }

    /// `∂_t B` from `u_t` and `u_xt`.
    fn b_time_derivative(&self, fr: &Frame, ut: &[Complex64], uxt: &[Complex64]) -> Vec<f64> {
        let t = fr.t;
        self.x
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let lam = (t * t + x * x).sqrt();
                let lam3 = lam * lam * lam;
                let u = fr.u[j];
                let ux = fr.ux[j];
                let im_cur = (u.conj() * ux).im;
                let d_im = (ut[j].conj() * ux).im + (u.conj() * uxt[j]).im;
                (2.0 * x * t / lam3) * im_cur - (2.0 * x / lam) * d_im
                    - (1.0 / lam - t * t / lam3) * u.norm_sqr()
                    - (t / lam) * 2.0 * (u.conj() * ut[j]).re
            })
            .collect()
    }

    /// Everything except `½∂_t B`, integrated pointwise. Returns the
    /// per-point values.
    fn spatial_terms(&self, fr: &Frame, ut: &[Complex64], grid: &crate::spectral::Grid) -> Result<Vec<f64>> {
        let t = fr.t;
        let n = self.x.len();
        let mut flux = Vec::with_capacity(n);
        let mut rest = Vec::with_capacity(n);
        for j in 0..n {
            let x = self.x[j];
            let lam = (t * t + x * x).sqrt();
            let lam2 = lam * lam;
            let lam3 = lam2 * lam;
            let lam5 = lam3 * lam2;
            let lam7 = lam5 * lam2;
            let u = fr.u[j];
            let ux = fr.ux[j];
            let s = u.norm_sqr();
            let a = -2.0 * x / lam;
            let g = Complex64::new(-t * t / lam3, -t / lam);
            let re_gx = 3.0 * t * t * x / lam5;
            let re_gxx = 3.0 * t * t / lam5 - 15.0 * t * t * x * x / lam7;
            let m = a * ux + g * u;
            let nl = self.nl_power(s);
            // the V|u|² part of l_V is differentiated by the product rule:
            // V' is only continuous at the junction of a steplike profile
            let l_smooth = 0.5
                * (-(Complex64::i() * u.conj() * ut[j]).re
                    + ux.norm_sqr()
                    + 2.0 * s * nl / (self.alpha + 2.0));
            flux.push(Complex64::new((ux * m.conj()).re - a * l_smooth - 0.5 * re_gx * s, 0.0));
            let da = -2.0 * t * t / lam3;
            let ds = 2.0 * (u.conj() * ux).re;
            let d_potential_flux =
                -0.5 * (da * self.v[j] * s + a * self.dv[j] * s + a * self.v[j] * ds);

            let big_g = self.alpha / (self.alpha + 2.0) * s * nl;
            let w = Complex64::new(0.0, 2.0 * t) * ux + x * u;
            rest.push(
                t * t * big_g / lam3 + 0.5 * s * re_gxx + w.norm_sqr() / (2.0 * lam3)
                    - x * self.dv[j] * s / lam
                    + d_potential_flux,
            );
        }
        let dflux = spectral_derivative(&ComplexField::from_parts(grid, flux))?;
        Ok(rest
            .iter()
            .zip(dflux.values())
            .map(|(r, d)| r + d.re)
            .collect())
    }

    /// `u_t = i(u_xx - V u - |u|^α u)`.
    fn equation_ut(&self, f: &ComplexField, ux: &[Complex64]) -> Result<Vec<Complex64>> {
        let uxx = spectral_derivative(&ComplexField::from_parts(f.grid(), ux.to_vec()))?;
        Ok(f.values()
            .iter()
            .zip(uxx.values())
            .zip(self.v)
            .map(|((&u, &uxx), &v)| {
                let nl = self.nl_power(u.norm_sqr());
                Complex64::i() * (uxx - v * u - nl * u)
            })
            .collect())
    }

    fn density(&self, fr: &Frame) -> f64 {
        if !self.nonlinear {
            return 0.0;
        }
        let t = fr.t;
        self.x
            .iter()
            .zip(&fr.u)
            .map(|(&x, u)| {
                let lam = (t * t + x * x).sqrt();
                let s = u.norm_sqr();
                t * t * s * self.nl_power(s) / (lam * lam * lam)
            })
            .sum::<f64>()
            * self.dx
    }

    fn repulsive(&self, fr: &Frame) -> f64 {
        let t = fr.t;
        self.x
            .iter()
            .zip(&fr.u)
            .zip(self.dv)
            .map(|((&x, u), &dv)| -x * dv * u.norm_sqr() / (t * t + x * x).sqrt())
            .sum::<f64>()
            * self.dx
    }
}

/// Second-order derivative weights at the middle of three (possibly unevenly
/// spaced) points.
fn three_point_weights(t0: f64, t1: f64, t2: f64) -> (f64, f64, f64) {
    let hm = t1 - t0;
    let hp = t2 - t1;
    let denom = hm * hp * (hm + hp);
    (-hp * hp / denom, (hp * hp - hm * hm) / denom, hm * hm / denom)
}

pub fn morawetz_report_with(traj: &Trajectory, opts: &MorawetzOptions) -> Result<MorawetzReport> {
    let problem = &traj.problem;
    let grid = &problem.grid;
    let ctx = Context {
        x: grid.x(),
        v: problem.potential.values(),
        dv: problem.potential.gradient(),
        alpha: problem.alpha,
        nonlinear: !problem.linear,
        dx: grid.dx(),
    };
    let selected: Vec<_> = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= opts.t_min && s.t > 0.0)
        .collect();
    if selected.len() < 3 {
        return Err(SnlsError::InsufficientData(format!(
            "need at least 3 snapshots with t >= {}, found {}",
            opts.t_min,
            selected.len()
        )));
    }
    let frames = selected
        .iter()
        .map(|s| ctx.frame(s.t, &s.field))
        .collect::<Result<Vec<_>>>()?;

    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let density_series: Vec<f64> = frames.iter().map(|f| ctx.density(f)).collect();
    let repulsive_term_series: Vec<f64> = frames.iter().map(|f| ctx.repulsive(f)).collect();
    let integral_value = trapezoid(&times, &density_series);

    let mut residual_times = Vec::new();
    let mut residuals = Vec::new();
    match opts.time_derivative {
        TimeDerivative::SnapshotDifference => {
            let b: Vec<Vec<f64>> = frames.iter().map(|f| ctx.b_density(f)).collect();
            for i in 1..frames.len() - 1 {
                let (w0, w1, w2) = three_point_weights(times[i - 1], times[i], times[i + 1]);
                let fr = &frames[i];
                let ut: Vec<Complex64> = (0..fr.u.len())
                    .map(|j| w0 * frames[i - 1].u[j] + w1 * fr.u[j] + w2 * frames[i + 1].u[j])
                    .collect();
                let spatial = ctx.spatial_terms(fr, &ut, grid)?;
                let total: f64 = spatial
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        let bt = w0 * b[i - 1][j] + w1 * b[i][j] + w2 * b[i + 1][j];
                        (0.5 * bt + s).abs()
                    })
                    .sum();
                residual_times.push(times[i]);
                residuals.push(total * ctx.dx);
            }
        }
        TimeDerivative::EquationRhs => {
            for (fr, snap) in frames.iter().zip(&selected) {
                let ut = ctx.equation_ut(&snap.field, &fr.ux)?;
                let uxt = spectral_derivative(&ComplexField::from_parts(grid, ut.clone()))?;
                let bt = ctx.b_time_derivative(fr, &ut, uxt.values());
                let spatial = ctx.spatial_terms(fr, &ut, grid)?;
                let total: f64 = bt
                    .iter()
                    .zip(&spatial)
                    .map(|(b, s)| (0.5 * b + s).abs())
                    .sum();
                residual_times.push(fr.t);
                residuals.push(total * ctx.dx);
            }
        }
    }

    Ok(MorawetzReport {
        times,
        density_series,
        repulsive_term_series,
        integral_value,
        residual_times,
        identity_residual_series: residuals,
    })
}
