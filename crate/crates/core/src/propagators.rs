//! Linear flows: free `e^{itΔ}`, mass-shifted `e^{it(Δ-1)}` and perturbed
//! `e^{it(Δ-V)}`, with `i∂_t u = -∂²_x u + V u` fixing all signs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnlsError};
use crate::potentials::SampledPotential;
use crate::spectral::{ComplexField, Grid};

/// Largest grid accepted by the dense eigendecomposition oracle.
pub const EIGEN_MAX_POINTS: usize = 1024;
/// Largest splitting substep.
pub const MAX_SPLIT_DT: f64 = 0.1;

/// `e^{-iθ}`, exact when `θ` is a float multiple of `π/2`.
pub(crate) fn unit_phase(theta: f64) -> Complex64 {
    let quarters = theta / FRAC_PI_2;
    let k = quarters.round();
    if k.abs() < 1e15 && (theta - k * FRAC_PI_2).abs() <= 4.0 * f64::EPSILON * theta.abs() {
        return match (k as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    Complex64::from_polar(1.0, -theta)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(SnlsError::Parameter(format!("non-finite time {t}")))
    }
}

/// Number of equal substeps of size at most `dt` covering `t`.
///
/// Every substep has the same length `t/n`, so requested endpoints are hit
/// exactly and the backward flow is the exact inverse of the forward one.
pub fn substep_count(t: f64, dt: f64) -> usize {
    let raw = t.abs() / dt;
    let n = (raw - 1e-9 * raw.max(1.0)).ceil();
    (n.max(1.0)) as usize
}

pub(crate) fn kinetic_symbol(grid: &Grid, t: f64) -> Vec<Complex64> {
    grid.wavenumbers()
        .iter()
        .map(|&xi| Complex64::from_polar(1.0, -xi * xi * t))
        .collect()
}

/// Exact free evolution `e^{itΔ}f` (multiplier `e^{-itξ²}`).
pub fn evolve_free(f: &ComplexField, t: f64) -> Result<ComplexField> {
    check_time(t)?;
    f.validate()?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let grid = f.grid();
    let mut buf = f.values().to_vec();
    let mut scratch = Vec::new();
    grid.apply_multiplier(&mut buf, &kinetic_symbol(grid, t), &mut scratch);
    Ok(ComplexField::from_parts(grid, buf))
}

/// `e^{it(Δ-1)}f = e^{-it} e^{itΔ}f`.
pub fn evolve_shifted(f: &ComplexField, t: f64) -> Result<ComplexField> {
    let free = evolve_free(f, t)?;
    Ok(apply_shift_phase(&free, t))
}

/// Multiplies by `e^{-it}`; shared by every code path that forms the shifted flow.
pub(crate) fn apply_shift_phase(f: &ComplexField, t: f64) -> ComplexField {
    let phase = unit_phase(t);
    if phase == Complex64::new(1.0, 0.0) {
        return f.clone();
    }
    f.scaled(phase)
}

/// `(4π)^{-1/2}`, the modulus constant of the free 1D Schrödinger kernel.
pub fn decay_kernel_bound_free() -> f64 {
    1.0 / (4.0 * PI).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    StrangSplitting,
    Eigendecomposition,
}

impl FromStr for PropagationMethod {
    type Err = SnlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strang_splitting" | "strang" => Ok(PropagationMethod::StrangSplitting),
            "eigendecomposition" | "eig" => Ok(PropagationMethod::Eigendecomposition),
            other => Err(SnlsError::Config(format!("unknown propagation method '{other}'"))),
        }
    }
}

impl fmt::Display for PropagationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropagationMethod::StrangSplitting => "strang_splitting",
            PropagationMethod::Eigendecomposition => "eigendecomposition",
        })
    }
}

/// Second-derivative matrix used by the eigendecomposition oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStencil {
    /// Closed-form periodic Fourier collocation matrix. Same symbol as the
    /// FFT multiplier, but assembled entrywise without any transform.
    FourierCollocation,
    /// Periodic three-point central differences.
    CentralDifference,
}

/// Dense `-D₂ + diag(V)` for the chosen stencil.
pub fn oracle_hamiltonian(grid: &Grid, potential: &[f64], stencil: OracleStencil) -> DMatrix<f64> {
    let n = grid.n_points();
    let mut h = DMatrix::<f64>::zeros(n, n);
    match stencil {
        OracleStencil::FourierCollocation => {
            let step = 2.0 * PI / n as f64;
            let scale = (2.0 * PI / grid.length()).powi(2);
            let diag = -(PI * PI) / (3.0 * step * step) - 1.0 / 6.0;
            for j in 0..n {
                for k in 0..n {
                    let d2 = if j == k {
                        diag
                    } else {
                        let d = j as i64 - k as i64;
                        let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let s = (0.5 * step * d as f64).sin();
                        -0.5 * sign / (s * s)
                    };
                    h[(j, k)] = -scale * d2;
                }
            }
        }
        OracleStencil::CentralDifference => {
            let inv = 1.0 / (grid.dx() * grid.dx());
            for j in 0..n {
                h[(j, j)] = 2.0 * inv;
                h[(j, (j + 1) % n)] -= inv;
                h[(j, (j + n - 1) % n)] -= inv;
            }
        }
    }
    for (j, &v) in potential.iter().enumerate() {
        h[(j, j)] += v;
    }
    h
}

struct EigenBasis {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// The perturbed group `e^{it(Δ-V)}` by Strang splitting or by an exact
/// eigendecomposition of the discretised Hamiltonian.
///
/// Immutable after construction; evolve calls may run concurrently.
#[derive(Clone)]
pub struct PerturbedPropagator {
    grid: Grid,
    potential: Arc<SampledPotential>,
    method: PropagationMethod,
    dt: f64,
    basis: Option<Arc<EigenBasis>>,
}

impl fmt::Debug for PerturbedPropagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedPropagator")
            .field("grid", &self.grid)
            .field("method", &self.method)
            .field("dt", &self.dt)
            .finish()
    }
}

impl PerturbedPropagator {
    pub fn strang(grid: &Grid, potential: SampledPotential, dt: f64) -> Result<Self> {
        grid.check_len(potential.len(), "potential")?;
        if !(dt > 0.0 && dt <= MAX_SPLIT_DT) {
            return Err(SnlsError::Parameter(format!(
                "splitting dt must lie in (0, {MAX_SPLIT_DT}], got {dt}"
            )));
        }
        Ok(PerturbedPropagator {
            grid: grid.clone(),
            potential: Arc::new(potential),
            method: PropagationMethod::StrangSplitting,
            dt,
            basis: None,
        })
    }

    /// Diagonalises `H = -D₂ + diag(V)` once; cost `O(N³)`.
    pub fn eigen(grid: &Grid, potential: SampledPotential, stencil: OracleStencil) -> Result<Self> {
        grid.check_len(potential.len(), "potential")?;
        if grid.n_points() > EIGEN_MAX_POINTS {
            return Err(SnlsError::Capability(format!(
                "eigendecomposition limited to {EIGEN_MAX_POINTS} points, grid has {}",
                grid.n_points()
            )));
        }
        let h = oracle_hamiltonian(grid, potential.values(), stencil);
        let eig = SymmetricEigen::new(h);
        let basis = EigenBasis {
            energies: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        };
        Ok(PerturbedPropagator {
            grid: grid.clone(),
            potential: Arc::new(potential),
            method: PropagationMethod::Eigendecomposition,
            dt: 0.0,
            basis: Some(Arc::new(basis)),
        })
    }

    pub fn new(
        grid: &Grid,
        potential: SampledPotential,
        method: PropagationMethod,
        dt: f64,
    ) -> Result<Self> {
        match method {
            PropagationMethod::StrangSplitting => Self::strang(grid, potential, dt),
            PropagationMethod::Eigendecomposition => {
                Self::eigen(grid, potential, OracleStencil::FourierCollocation)
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &SampledPotential {
        &self.potential
    }

    pub fn method(&self) -> PropagationMethod {
        self.method
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Eigenvalues of the oracle Hamiltonian, ascending.
    pub fn energies(&self) -> Option<&[f64]> {
        self.basis.as_deref().map(|b| b.energies.as_slice())
    }

    /// `e^{it(Δ-V)}f`; negative `t` runs the flow backwards.
    pub fn evolve(&self, f: &ComplexField, t: f64) -> Result<ComplexField> {
        check_time(t)?;
        self.grid.check_same(f.grid(), "evolve_perturbed")?;
        f.validate()?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        let values = match &self.basis {
            Some(basis) => evolve_eigen(basis, f.values(), t),
            None => {
                let mut v = f.values().to_vec();
                self.strang_in_place(&mut v, t);
                v
            }
        };
        Ok(ComplexField::from_parts(&self.grid, values))
    }

    /// Evolves through each requested time in order, returning one field per
    /// entry. Times need not be sorted; each leg restarts from the previous
    /// output.
    pub fn evolve_sequence(&self, f: &ComplexField, times: &[f64]) -> Result<Vec<ComplexField>> {
        let mut out = Vec::with_capacity(times.len());
        let mut current = f.clone();
        let mut t_now = 0.0;
        for &t in times {
            current = self.evolve(&current, t - t_now)?;
            t_now = t;
            out.push(current.clone());
        }
        Ok(out)
    }

    fn strang_in_place(&self, v: &mut [Complex64], t: f64) {
        let n_steps = substep_count(t, self.dt);
        let h = t / n_steps as f64;
        let grid = &self.grid;
        let kinetic = kinetic_symbol(grid, h);
        let half: Vec<Complex64> = self
            .potential
            .values()
            .iter()
            .map(|&p| Complex64::from_polar(1.0, -0.5 * p * h))
            .collect();
        let full: Vec<Complex64> = half.iter().map(|c| c * c).collect();
        let mut scratch = Vec::new();
        mul_in_place(v, &half);
        for step in 0..n_steps {
            grid.apply_multiplier(v, &kinetic, &mut scratch);
            if step + 1 == n_steps {
                mul_in_place(v, &half);
            } else {
                mul_in_place(v, &full);
            }
        }
    }
}

fn mul_in_place(v: &mut [Complex64], phase: &[Complex64]) {
    for (a, p) in v.iter_mut().zip(phase) {
        *a *= p;
    }
}

fn evolve_eigen(basis: &EigenBasis, values: &[Complex64], t: f64) -> Vec<Complex64> {
    let re = DVector::from_iterator(values.len(), values.iter().map(|v| v.re));
    let im = DVector::from_iterator(values.len(), values.iter().map(|v| v.im));
    let q = &basis.vectors;
    let cre = q.tr_mul(&re);
    let cim = q.tr_mul(&im);
    let mut rot_re = DVector::zeros(values.len());
    let mut rot_im = DVector::zeros(values.len());
    for (k, &e) in basis.energies.iter().enumerate() {
        let c = Complex64::new(cre[k], cim[k]) * Complex64::from_polar(1.0, -e * t);
        rot_re[k] = c.re;
        rot_im[k] = c.im;
    }
    let out_re = q * rot_re;
    let out_im = q * rot_im;
    out_re
        .iter()
        .zip(out_im.iter())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect()
}

/// Convenience wrapper matching the free-function style of the other flows.
pub fn evolve_perturbed(p: &PerturbedPropagator, f: &ComplexField, t: f64) -> Result<ComplexField> {
    p.evolve(f, t)
}
