//! Uniform periodic grid, Fourier transforms and norm primitives.
//!
//! The continuous transform is `f̂(ξ) = ∫ f(x) e^{-iξx} dx`; on the grid it is
//! approximated by `f̂_k = dx Σ_j f_j e^{-iξ_k x_j}` with `x_j = -L/2 + j dx`.
//! Wavenumbers are stored in FFT order (`0, 1, …, N/2-1, -N/2, …, -1` times
//! `2π/L`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SnlsError};

pub const MIN_POINTS: usize = 16;

struct GridInner {
    n_points: usize,
    length: f64,
    dx: f64,
    x: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic lattice on `[-L/2, L/2)`.
///
/// Cloning is cheap; FFT plans are shared and immutable. Every transform call
/// allocates its own scratch, so a `Grid` can be used from many threads.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.inner.n_points)
            .field("length", &self.inner.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n_points == other.inner.n_points
            && self.inner.length.to_bits() == other.inner.length.to_bits()
    }
}

impl Grid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(SnlsError::Parameter(format!(
                "n_points must be a power of two >= {MIN_POINTS}, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SnlsError::Parameter(format!(
                "length must be finite and positive, got {length}"
            )));
        }
        let dx = length / n_points as f64;
        let x = (0..n_points)
            .map(|j| -0.5 * length + j as f64 * dx)
            .collect();
        let half = n_points / 2;
        let wavenumbers = (0..n_points)
            .map(|j| {
                let k = if j < half {
                    j as f64
                } else {
                    j as f64 - n_points as f64
                };
                2.0 * PI * k / length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Grid {
            inner: Arc::new(GridInner {
                n_points,
                length,
                dx,
                x,
                wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn n_points(&self) -> usize {
        self.inner.n_points
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    /// Sample positions `x_j = -L/2 + j dx`.
    pub fn x(&self) -> &[f64] {
        &self.inner.x
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// Wavenumbers sorted ascending, `k = -N/2 … N/2-1`.
    pub fn wavenumbers_ordered(&self) -> Vec<f64> {
        let half = self.n_points() / 2;
        let w = self.wavenumbers();
        w[half..].iter().chain(w[..half].iter()).copied().collect()
    }

    /// Index of the grid point nearest to `x`, wrapping periodically.
    pub fn nearest_index(&self, x: f64) -> usize {
        let n = self.n_points() as f64;
        let j = ((x + 0.5 * self.length()) / self.dx()).round();
        (j.rem_euclid(n)) as usize
    }

    pub(crate) fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(SnlsError::Dimension(format!(
                "{what}: grid (N={}, L={}) does not match grid (N={}, L={})",
                self.n_points(),
                self.length(),
                other.n_points(),
                other.length()
            )))
        }
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len == self.n_points() {
            Ok(())
        } else {
            Err(SnlsError::Dimension(format!(
                "{what}: expected {} samples, got {len}",
                self.n_points()
            )))
        }
    }

    /// Raw unnormalised forward DFT in place.
    pub(crate) fn fft_in_place(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let need = self.inner.forward.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        self.inner.forward.process_with_scratch(buf, &mut scratch[..need]);
    }

    /// Raw inverse DFT in place, including the `1/N` normalisation.
    pub(crate) fn ifft_in_place(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let need = self.inner.inverse.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        self.inner.inverse.process_with_scratch(buf, &mut scratch[..need]);
        let s = 1.0 / self.n_points() as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    /// Applies the Fourier multiplier `symbol[k]` (FFT order) to `buf`.
    pub(crate) fn apply_multiplier(
        &self,
        buf: &mut [Complex64],
        symbol: &[Complex64],
        scratch: &mut Vec<Complex64>,
    ) {
        self.fft_in_place(buf, scratch);
        for (v, s) in buf.iter_mut().zip(symbol) {
            *v *= s;
        }
        self.ifft_in_place(buf, scratch);
    }
}

/// Complex samples of a wavefunction on a [`Grid`].
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl PartialEq for ComplexField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len(), "ComplexField::new")?;
        let f = ComplexField {
            grid: grid.clone(),
            values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.x().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Builds a field without the finiteness check. Callers must guarantee
    /// the length matches.
    pub(crate) fn from_parts(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.check_len(self.values.len(), "field")?;
        match self
            .values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            None => Ok(()),
            Some(j) => Err(SnlsError::InvalidField(format!(
                "non-finite sample {} at index {j}",
                self.values[j]
            ))),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        ComplexField::from_parts(&self.grid, self.values.iter().map(|v| v * c).collect())
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: Complex64, other: &ComplexField) -> Result<Self> {
        self.grid.check_same(&other.grid, "axpy")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(ComplexField::from_parts(&self.grid, values))
    }

    pub fn try_add(&self, other: &ComplexField) -> Result<Self> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn try_sub(&self, other: &ComplexField) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Pointwise `|f_j|²`.
    pub fn modulus_sq(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// L² inner product `∫ f ḡ dx`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.check_same(&other.grid, "inner product")?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.grid.dx())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }
}

/// `f̂_k = dx Σ_j f_j e^{-iξ_k x_j}`, FFT order.
pub fn forward_transform(f: &ComplexField) -> Result<Vec<Complex64>> {
    f.validate()?;
    let grid = f.grid();
    let mut buf = f.values().to_vec();
    let mut scratch = Vec::new();
    grid.fft_in_place(&mut buf, &mut scratch);
    let x0 = grid.x()[0];
    for (v, &xi) in buf.iter_mut().zip(grid.wavenumbers()) {
        *v *= Complex64::from_polar(grid.dx(), -xi * x0);
    }
    Ok(buf)
}

/// Inverse of [`forward_transform`].
pub fn inverse_transform(grid: &Grid, spectrum: &[Complex64]) -> Result<ComplexField> {
    grid.check_len(spectrum.len(), "inverse_transform")?;
    let x0 = grid.x()[0];
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .zip(grid.wavenumbers())
        .map(|(v, &xi)| v * Complex64::from_polar(1.0 / grid.dx(), xi * x0))
        .collect();
    let mut scratch = Vec::new();
    grid.ifft_in_place(&mut buf, &mut scratch);
    ComplexField::new(grid, buf)
}

/// `∫ |f|² dx` by the rectangle rule.
pub fn l2_norm_sq(f: &ComplexField) -> Result<f64> {
    f.validate()?;
    Ok(raw_l2_norm_sq(f))
}

pub(crate) fn raw_l2_norm_sq(f: &ComplexField) -> f64 {
    f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid().dx()
}

/// `∫ |∂_x f|² dx` evaluated in Fourier space as `(1/L) Σ ξ_k² |f̂_k|²`.
///
/// The Nyquist mode is included, which makes this the exact quadratic form of
/// the kinetic multiplier used by the propagators.
pub fn dirichlet_norm_sq(f: &ComplexField) -> Result<f64> {
    f.validate()?;
    let grid = f.grid();
    let mut buf = f.values().to_vec();
    let mut scratch = Vec::new();
    grid.fft_in_place(&mut buf, &mut scratch);
    let s: f64 = buf
        .iter()
        .zip(grid.wavenumbers())
        .map(|(v, &xi)| xi * xi * v.norm_sqr())
        .sum();
    // |f̂_k|² = dx² |DFT_k|², divided by L = N dx.
    Ok(s * grid.dx() / grid.n_points() as f64)
}

/// `‖f‖²_{L²} + ‖∂_x f‖²_{L²}`.
pub fn h1_norm_sq(f: &ComplexField) -> Result<f64> {
    Ok(l2_norm_sq(f)? + dirichlet_norm_sq(f)?)
}

/// Spectral derivative: multiplication by `iξ` in Fourier space.
///
/// The Nyquist coefficient is dropped so that real fields stay real.
pub fn spectral_derivative(f: &ComplexField) -> Result<ComplexField> {
    f.validate()?;
    let grid = f.grid();
    let mut scratch = Vec::new();
    let mut buf = f.values().to_vec();
    let nyq = grid.n_points() / 2;
    let symbol: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .enumerate()
        .map(|(k, &xi)| {
            if k == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, xi)
            }
        })
        .collect();
    grid.apply_multiplier(&mut buf, &symbol, &mut scratch);
    Ok(ComplexField::from_parts(grid, buf))
}

/// `(∫ |f|^p dx)^{1/p}`; `p = ∞` gives the sup norm.
pub fn lp_norm(f: &ComplexField, p: f64) -> Result<f64> {
    f.validate()?;
    if p.is_infinite() && p > 0.0 {
        return Ok(sup_norm(f));
    }
    if !(p >= 1.0) {
        return Err(SnlsError::Parameter(format!("Lebesgue exponent {p} < 1")));
    }
    let s: f64 = f.values().iter().map(|v| v.norm().powf(p)).sum();
    Ok((s * f.grid().dx()).powf(1.0 / p))
}

/// `∫ |f|^p dx`.
pub fn lp_norm_pow(f: &ComplexField, p: f64) -> f64 {
    f.values().iter().map(|v| v.norm().powf(p)).sum::<f64>() * f.grid().dx()
}

pub fn l1_norm(f: &ComplexField) -> Result<f64> {
    lp_norm(f, 1.0)
}

pub fn sup_norm(f: &ComplexField) -> f64 {
    f.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Fraction of mass in the outer 10% of the domain (5% at each end).
pub fn boundary_mass_fraction(f: &ComplexField) -> f64 {
    let n = f.grid().n_points();
    let edge = (n / 20).max(1);
    let total: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = f.values()[..edge]
        .iter()
        .chain(&f.values()[n - edge..])
        .map(|v| v.norm_sqr())
        .sum();
    outer / total
}

/// Fraction of spectral energy carried by wavenumbers with `|k| > N/3`.
pub fn spectral_tail_fraction(f: &ComplexField) -> f64 {
    let grid = f.grid();
    let n = grid.n_points();
    let mut buf = f.values().to_vec();
    let mut scratch = Vec::new();
    grid.fft_in_place(&mut buf, &mut scratch);
    let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let cut = n / 3;
    let tail: f64 = buf
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let k = if *j < n / 2 { *j } else { n - *j };
            k > cut
        })
        .map(|(_, v)| v.norm_sqr())
        .sum();
    tail / total
}

/// Translation `(τ_a f)(x) = f(x - a)` on the periodic domain.
///
/// Shifts by whole grid cells are exact index rotations; other shifts use the
/// Fourier phase `e^{-iξa}`.
pub fn translate(f: &ComplexField, shift: f64) -> Result<ComplexField> {
    f.validate()?;
    if !shift.is_finite() {
        return Err(SnlsError::Parameter(format!("non-finite shift {shift}")));
    }
    let grid = f.grid();
    let n = grid.n_points();
    let cells = shift / grid.dx();
    if (cells - cells.round()).abs() < 1e-9 {
        let m = (cells.round() as i64).rem_euclid(n as i64) as usize;
        let mut values = f.values().to_vec();
        values.rotate_right(m);
        return Ok(ComplexField::from_parts(grid, values));
    }
    let symbol: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|&xi| Complex64::from_polar(1.0, -xi * shift))
        .collect();
    let mut buf = f.values().to_vec();
    let mut scratch = Vec::new();
    grid.apply_multiplier(&mut buf, &symbol, &mut scratch);
    Ok(ComplexField::from_parts(grid, buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(100, 1.0).is_err());
        assert!(Grid::new(64, 0.0).is_err());
        assert!(Grid::new(64, f64::NAN).is_err());
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(64, 10.0).unwrap();
        assert_eq!(g.dx() * 64.0, 10.0);
        assert_eq!(g.x()[0], -5.0);
        let w = g.wavenumbers_ordered();
        assert_relative_eq!(w[0], -PI * 64.0 / 10.0, epsilon = 1e-12);
        // symmetric apart from -πN/L
        for k in 1..32 {
            assert_relative_eq!(w[32 + k], -w[32 - k], epsilon = 1e-12);
        }
    }

    #[test]
    fn l2_examples() {
        let g = Grid::new(64, 10.0).unwrap();
        assert_eq!(l2_norm_sq(&ComplexField::zeros(&g)).unwrap(), 0.0);
        let one = ComplexField::from_real_fn(&g, |_| 1.0).unwrap();
        assert_relative_eq!(l2_norm_sq(&one).unwrap(), 10.0, epsilon = 1e-12);

        let g = Grid::new(2048, 40.0).unwrap();
        let gauss = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let exact = (PI / 2.0).sqrt();
        assert!((l2_norm_sq(&gauss).unwrap() - 1.253_314_137_315_500_3).abs() < 1e-10);
        assert!((l2_norm_sq(&gauss).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn non_finite_rejected() {
        let g = Grid::new(16, 1.0).unwrap();
        let mut v = vec![c(0.0); 16];
        v[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            ComplexField::new(&g, v),
            Err(SnlsError::InvalidField(_))
        ));
        let mut f = ComplexField::zeros(&g);
        f.values_mut()[0] = c(f64::INFINITY);
        assert!(l2_norm_sq(&f).is_err());
        assert!(spectral_derivative(&f).is_err());
    }

    #[test]
    fn h1_examples() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        assert_eq!(h1_norm_sq(&ComplexField::zeros(&g)).unwrap(), 0.0);
        let pw = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x)).unwrap();
        assert_relative_eq!(h1_norm_sq(&pw).unwrap(), 4.0 * PI, epsilon = 1e-12);

        // ∫e^{-2x²} + ∫4x²e^{-2x²} = 2·√(π/2)
        let g = Grid::new(2048, 40.0).unwrap();
        let gauss = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        assert!((h1_norm_sq(&gauss).unwrap() - 2.0 * (PI / 2.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn derivative_examples() {
        let g = Grid::new(128, 20.0).unwrap();
        let d = spectral_derivative(&ComplexField::from_real_fn(&g, |_| 3.0).unwrap()).unwrap();
        assert!(sup_norm(&d) < 1e-13);

        let k1 = 2.0 * PI / 20.0 * 3.0;
        let s = ComplexField::from_real_fn(&g, |x| (k1 * x).sin()).unwrap();
        let ds = spectral_derivative(&s).unwrap();
        for (v, &x) in ds.values().iter().zip(g.x()) {
            assert!((v - c(k1 * (k1 * x).cos())).norm() < 1e-12);
        }

        let g = Grid::new(2048, 40.0).unwrap();
        let gauss = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let dg = spectral_derivative(&gauss).unwrap();
        let err = dg
            .values()
            .iter()
            .zip(g.x())
            .map(|(v, &x)| (v - c(-2.0 * x * (-x * x).exp())).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn transform_of_gaussian_matches_continuous_convention() {
        // ∫ e^{-x²} e^{-iξx} dx = √π e^{-ξ²/4}
        let g = Grid::new(512, 40.0).unwrap();
        let f = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let spec = forward_transform(&f).unwrap();
        for (v, &xi) in spec.iter().zip(g.wavenumbers()) {
            let exact = PI.sqrt() * (-xi * xi / 4.0).exp();
            assert!((v - c(exact)).norm() < 1e-12);
        }
    }

    #[test]
    fn translate_exact_and_fractional() {
        let g = Grid::new(256, 40.0).unwrap();
        let f = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let by_cells = translate(&f, 10.0 * g.dx()).unwrap();
        let expect = ComplexField::from_real_fn(&g, |x| {
            let y = x - 10.0 * g.dx();
            (-y * y).exp()
        })
        .unwrap();
        assert!(sup_norm(&by_cells.try_sub(&expect).unwrap()) < 1e-15);
        let frac = translate(&f, 1.2345).unwrap();
        let expect = ComplexField::from_real_fn(&g, |x| (-(x - 1.2345) * (x - 1.2345)).exp())
            .unwrap();
        assert!(sup_norm(&frac.try_sub(&expect).unwrap()) < 1e-12);
    }

    #[test]
    fn boundary_and_tail_monitors() {
        let g = Grid::new(256, 40.0).unwrap();
        let centred = ComplexField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        assert!(boundary_mass_fraction(&centred) < 1e-100);
        assert!(spectral_tail_fraction(&centred) < 1e-20);
        let edge = ComplexField::from_real_fn(&g, |x| (-(x + 19.5) * (x + 19.5)).exp()).unwrap();
        assert!(boundary_mass_fraction(&edge) > 0.5);
        assert_eq!(boundary_mass_fraction(&ComplexField::zeros(&g)), 0.0);
    }

    fn random_field(grid: &Grid, seed: &[(f64, f64)]) -> ComplexField {
        let values = seed.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        ComplexField::new(grid, values).unwrap()
    }

    proptest! {
        #[test]
        fn parseval(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
            let g = Grid::new(64, 7.5).unwrap();
            let f = random_field(&g, &vals);
            let spec = forward_transform(&f).unwrap();
            let via_spec: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.length();
            let direct = l2_norm_sq(&f).unwrap();
            prop_assert!((via_spec - direct).abs() <= 1e-12 * direct.max(1e-300));
        }

        #[test]
        fn round_trip(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 128)) {
            let g = Grid::new(128, 3.0).unwrap();
            let f = random_field(&g, &vals);
            let back = inverse_transform(&g, &forward_transform(&f).unwrap()).unwrap();
            let err = l2_norm_sq(&back.try_sub(&f).unwrap()).unwrap().sqrt();
            let norm = l2_norm_sq(&f).unwrap().sqrt();
            prop_assert!(err <= 1e-13 * norm);
        }

        #[test]
        fn derivative_is_linear(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32),
            ca in (-2.0f64..2.0, -2.0f64..2.0),
            cb in (-2.0f64..2.0, -2.0f64..2.0),
        ) {
            let g = Grid::new(32, 5.0).unwrap();
            let fa = random_field(&g, &a);
            let fb = random_field(&g, &b);
            let ca = Complex64::new(ca.0, ca.1);
            let cb = Complex64::new(cb.0, cb.1);
            let combo = fa.scaled(ca).axpy(cb, &fb).unwrap();
            let lhs = spectral_derivative(&combo).unwrap();
            let rhs = spectral_derivative(&fa).unwrap().scaled(ca)
                .axpy(cb, &spectral_derivative(&fb).unwrap()).unwrap();
            let err = sup_norm(&lhs.try_sub(&rhs).unwrap());
            prop_assert!(err <= 1e-12 * sup_norm(&rhs).max(1.0));
        }

        #[test]
        fn l2_translation_invariant(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32), m in 0usize..32) {
            let g = Grid::new(32, 4.0).unwrap();
            let f = random_field(&g, &vals);
            let shifted = translate(&f, m as f64 * g.dx()).unwrap();
            let a = l2_norm_sq(&f).unwrap();
            let b = l2_norm_sq(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * a.max(1e-300));
        }
    }
}
