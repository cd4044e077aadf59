//! Strang split-step integration of `i∂_t u = -∂²_x u + V u + |u|^α u`.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::diagnostics::energy_with;
use crate::error::{Result, SnlsError};
use crate::potentials::SampledPotential;
use crate::propagators::{kinetic_symbol, substep_count};
use crate::spectral::{
    boundary_mass_fraction, raw_l2_norm_sq, spectral_tail_fraction, sup_norm, ComplexField, Grid,
};

/// Smallest exponent accepted outside permissive mode.
pub const SUPERCRITICAL_ALPHA: f64 = 4.0;
/// Sup-norm growth factor that aborts a run.
pub const BLOWUP_FACTOR: f64 = 1e6;
pub const WRAP_WARNING_FRACTION: f64 = 0.01;
pub const RESOLUTION_WARNING_FRACTION: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct NlsProblem {
    pub grid: Grid,
    pub potential: SampledPotential,
    pub alpha: f64,
    /// Drops the `|u|^α u` term entirely.
    pub linear: bool,
    /// Accepts `0 < α ≤ 4`; results are tagged as exploratory.
    pub permissive: bool,
    pub u0: ComplexField,
    pub dt: f64,
    pub t_final: f64,
    /// Sorted times in `[0, t_final]`; `0` and `t_final` are always recorded.
    pub record_times: Vec<f64>,
}

impl NlsProblem {
    pub fn new(
        grid: &Grid,
        potential: SampledPotential,
        alpha: f64,
        u0: ComplexField,
        dt: f64,
        t_final: f64,
    ) -> Self {
        NlsProblem {
            grid: grid.clone(),
            potential,
            alpha,
            linear: false,
            permissive: false,
            u0,
            dt,
            t_final,
            record_times: vec![0.0, t_final],
        }
    }

    pub fn linear(mut self) -> Self {
        self.linear = true;
        self
    }

    pub fn permissive(mut self) -> Self {
        self.permissive = true;
        self
    }

    /// Records every `spacing` from 0 to `t_final` (inclusive).
    pub fn with_record_spacing(mut self, spacing: f64) -> Self {
        self.record_times = uniform_times(0.0, self.t_final, spacing);
        self
    }

    pub fn with_record_times(mut self, times: Vec<f64>) -> Self {
        self.record_times = times;
        self
    }

    /// `None` when the nonlinearity is switched off.
    pub fn nonlinearity(&self) -> Option<f64> {
        if self.linear {
            None
        } else {
            Some(self.alpha)
        }
    }

    pub fn is_exploratory(&self) -> bool {
        !self.linear && self.alpha <= SUPERCRITICAL_ALPHA
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(SnlsError::Range(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.linear && self.alpha <= SUPERCRITICAL_ALPHA && !self.permissive {
            return Err(SnlsError::Range(format!(
                "alpha = {} outside the supercritical range alpha > 4 (enable permissive mode)",
                self.alpha
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SnlsError::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(SnlsError::Parameter(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        self.grid.check_same(self.u0.grid(), "initial datum")?;
        self.grid.check_len(self.potential.len(), "potential")?;
        self.u0.validate()?;
        if self
            .record_times
            .iter()
            .any(|&t| !(t >= 0.0 && t <= self.t_final * (1.0 + 1e-12)))
        {
            return Err(SnlsError::Parameter("record_times must lie in [0, t_final]".into()));
        }
        if self.record_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(SnlsError::Parameter("record_times must be sorted".into()));
        }
        Ok(())
    }

    /// Energy with this problem's potential and nonlinearity.
    pub fn energy_of(&self, f: &ComplexField) -> Result<f64> {
        energy_with(f, self.potential.values(), self.nonlinearity())
    }

    fn snapshot_times(&self) -> Vec<f64> {
        let mut times = Vec::with_capacity(self.record_times.len() + 2);
        times.push(0.0);
        for &t in &self.record_times {
            let t = t.min(self.t_final);
            if t > *times.last().unwrap() {
                times.push(t);
            }
        }
        if self.t_final > *times.last().unwrap() {
            times.push(self.t_final);
        }
        times
    }
}

/// `start, start + h, …` up to and including `end` (the last point snaps to `end`).
pub fn uniform_times(start: f64, end: f64, spacing: f64) -> Vec<f64> {
    let n = substep_count(end - start, spacing);
    let h = (end - start) / n as f64;
    (0..=n)
        .map(|k| if k == n { end } else { start + k as f64 * h })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub sup_norm: f64,
    pub boundary_fraction: f64,
    pub spectral_tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    WrapAround { t: f64, boundary_fraction: f64 },
    Resolution { t: f64, spectral_tail: f64 },
    Exploratory { alpha: f64 },
    Coverage { snapshots_per_unit_time: f64 },
    InterpolatedSnapshot { t: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::WrapAround { t, boundary_fraction } => write!(
                f,
                "boundary mass fraction {boundary_fraction:.3e} at t={t}: wrap-around likely"
            ),
            Warning::Resolution { t, spectral_tail } => write!(
                f,
                "high-wavenumber energy fraction {spectral_tail:.3e} at t={t}: grid under-resolved"
            ),
            Warning::Exploratory { alpha } => {
                write!(f, "alpha = {alpha} is outside alpha > 4: exploratory run")
            }
            Warning::Coverage {
                snapshots_per_unit_time,
            } => write!(
                f,
                "only {snapshots_per_unit_time:.2} snapshots per unit time (want >= 10)"
            ),
            Warning::InterpolatedSnapshot { t } => {
                write!(f, "no snapshot at t={t}; state re-integrated from the nearest earlier one")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: ComplexField,
}

/// Recorded solution. Immutable once returned by [`solve`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub problem: NlsProblem,
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SnapshotDiagnostics>,
    pub warnings: Vec<Warning>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    /// Snapshot whose time matches `t` to `1e-12` relative.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.snapshots.iter().find(|s| (s.t - t).abs() <= tol)
    }

    pub fn max_relative_mass_drift(&self) -> f64 {
        relative_drift(self.series.iter().map(|d| d.mass))
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        relative_drift(self.series.iter().map(|d| d.energy))
    }

    /// Builds a trajectory from externally produced snapshots (e.g. a linear
    /// flow), filling in the diagnostics series.
    pub fn from_snapshots(problem: NlsProblem, snapshots: Vec<Snapshot>) -> Result<Self> {
        let series = snapshots
            .iter()
            .map(|s| snapshot_diagnostics(&problem, s.t, &s.field))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            problem,
            snapshots,
            series,
            warnings: Vec::new(),
        })
    }
}

fn relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let Some(&first) = values.first() else {
        return 0.0;
    };
    let max_dev = values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max);
    if first == 0.0 {
        max_dev
    } else {
        max_dev / first.abs()
    }
}

fn snapshot_diagnostics(problem: &NlsProblem, t: f64, f: &ComplexField) -> Result<SnapshotDiagnostics> {
    Ok(SnapshotDiagnostics {
        t,
        mass: raw_l2_norm_sq(f),
        energy: problem.energy_of(f)?,
        sup_norm: sup_norm(f),
        boundary_fraction: boundary_mass_fraction(f),
        spectral_tail: spectral_tail_fraction(f),
    })
}

/// `|z|^α` computed from `|z|²`, with exact integer / half-integer fast paths.
#[derive(Clone, Copy, Debug)]
struct ModulusPower {
    half_alpha: f64,
    kind: PowerKind,
}

#[derive(Clone, Copy, Debug)]
enum PowerKind {
    Integer(i32),
    HalfInteger(i32),
    Real,
}

impl ModulusPower {
    fn new(alpha: f64) -> Self {
        let half_alpha = 0.5 * alpha;
        let kind = if half_alpha.fract() == 0.0 && half_alpha.abs() < 64.0 {
            PowerKind::Integer(half_alpha as i32)
        } else if alpha.fract() == 0.0 && alpha.abs() < 128.0 {
            PowerKind::HalfInteger(half_alpha.floor() as i32)
        } else {
            PowerKind::Real
        };
        ModulusPower { half_alpha, kind }
    }

    #[inline]
    fn of_norm_sqr(&self, s: f64) -> f64 {
        match self.kind {
            PowerKind::Integer(k) => s.powi(k),
            PowerKind::HalfInteger(k) => s.powi(k) * s.sqrt(),
            PowerKind::Real => s.powf(self.half_alpha),
        }
    }
}

/// Pointwise multiplication by `e^{-i(V_j + |f_j|^α) dt}`; `|out_j| = |f_j|`.
///
/// Negative `dt` runs the substep backwards.
pub fn phase_substep(f: &ComplexField, v: &[f64], alpha: f64, dt: f64) -> Result<ComplexField> {
    f.validate()?;
    f.grid().check_len(v.len(), "potential")?;
    if !dt.is_finite() || !alpha.is_finite() {
        return Err(SnlsError::Parameter("non-finite dt or alpha".into()));
    }
    let mut values = f.values().to_vec();
    apply_phase(&mut values, v, Some(ModulusPower::new(alpha)), dt);
    Ok(ComplexField::from_parts(f.grid(), values))
}

#[inline]
fn apply_phase(values: &mut [Complex64], v: &[f64], power: Option<ModulusPower>, tau: f64) {
    match power {
        Some(pw) => {
            for (u, &pot) in values.iter_mut().zip(v) {
                let s = u.norm_sqr();
                let theta = (pot + pw.of_norm_sqr(s)) * tau;
                *u *= Complex64::new(theta.cos(), -theta.sin());
            }
        }
        None => {
            for (u, &pot) in values.iter_mut().zip(v) {
                let theta = pot * tau;
                *u *= Complex64::new(theta.cos(), -theta.sin());
            }
        }
    }
}

/// Stateful split-step integrator; owns its FFT scratch.
struct Stepper<'a> {
    grid: &'a Grid,
    potential: &'a [f64],
    power: Option<ModulusPower>,
    dt: f64,
    scratch: Vec<Complex64>,
    symbols: HashMap<u64, Vec<Complex64>>,
}

impl<'a> Stepper<'a> {
    fn new(grid: &'a Grid, potential: &'a [f64], alpha: Option<f64>, dt: f64) -> Self {
        Stepper {
            grid,
            potential,
            power: alpha.map(ModulusPower::new),
            dt,
            scratch: Vec::new(),
            symbols: HashMap::new(),
        }
    }

    /// Advances `values` by `t` using equal substeps; checks the blow-up
    /// guard against `sup_limit` every 16 substeps and at the end.
    fn advance(&mut self, values: &mut [Complex64], t: f64, sup_limit: Option<f64>) -> Result<()> {
        if t == 0.0 {
            return Ok(());
        }
        let n = substep_count(t, self.dt);
        let h = t / n as f64;
        let grid = self.grid;
        let kinetic = self
            .symbols
            .entry(h.to_bits())
            .or_insert_with(|| kinetic_symbol(grid, h))
            .clone();
        apply_phase(values, self.potential, self.power, 0.5 * h);
        for step in 0..n {
            grid.apply_multiplier(values, &kinetic, &mut self.scratch);
            let tau = if step + 1 == n { 0.5 * h } else { h };
            apply_phase(values, self.potential, self.power, tau);
            if (step % 16 == 15 || step + 1 == n) && !guard_ok(values, sup_limit) {
                return Err(SnlsError::Instability(format!(
                    "sup norm exceeded {BLOWUP_FACTOR:e} x initial (or became non-finite) \
                     after {} substeps of {h}; reduce dt",
                    step + 1
                )));
            }
        }
        Ok(())
    }
}

fn guard_ok(values: &[Complex64], sup_limit: Option<f64>) -> bool {
    let mut sup: f64 = 0.0;
    for v in values {
        let m = v.norm_sqr();
        if !m.is_finite() {
            return false;
        }
        sup = sup.max(m);
    }
    match sup_limit {
        Some(limit) => sup.sqrt() <= limit,
        None => true,
    }
}

/// Evolves `u` by time `t` (either sign) under the full equation.
pub fn evolve_nls(
    u: &ComplexField,
    potential: &SampledPotential,
    alpha: Option<f64>,
    dt: f64,
    t: f64,
) -> Result<ComplexField> {
    u.validate()?;
    u.grid().check_len(potential.len(), "potential")?;
    if !(dt > 0.0) || !t.is_finite() {
        return Err(SnlsError::Parameter(format!("bad dt={dt} or t={t}")));
    }
    let sup0 = sup_norm(u);
    let limit = (sup0 > 0.0).then_some(sup0 * BLOWUP_FACTOR);
    let mut stepper = Stepper::new(u.grid(), potential.values(), alpha, dt);
    let mut values = u.values().to_vec();
    stepper.advance(&mut values, t, limit)?;
    Ok(ComplexField::from_parts(u.grid(), values))
}

/// Integrates the problem, recording snapshots and diagnostics.
pub fn solve(problem: &NlsProblem) -> Result<Trajectory> {
    problem.validate()?;
    let times = problem.snapshot_times();
    let sup0 = sup_norm(&problem.u0);
    let limit = (sup0 > 0.0).then_some(sup0 * BLOWUP_FACTOR);
    let mut stepper = Stepper::new(
        &problem.grid,
        problem.potential.values(),
        problem.nonlinearity(),
        problem.dt,
    );

    let mut warnings = Vec::new();
    if problem.is_exploratory() {
        warnings.push(Warning::Exploratory {
            alpha: problem.alpha,
        });
    }
    let mut wrap_warned = false;
    let mut resolution_warned = false;

    let mut values = problem.u0.values().to_vec();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut series = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    for &t in &times {
        stepper.advance(&mut values, t - t_prev, limit)?;
        t_prev = t;
        let field = if t == 0.0 {
            problem.u0.clone()
        } else {
            ComplexField::from_parts(&problem.grid, values.clone())
        };
        let diag = snapshot_diagnostics(problem, t, &field)?;
        if !wrap_warned && diag.boundary_fraction > WRAP_WARNING_FRACTION {
            warnings.push(Warning::WrapAround {
                t,
                boundary_fraction: diag.boundary_fraction,
            });
            wrap_warned = true;
        }
        if !resolution_warned && diag.spectral_tail > RESOLUTION_WARNING_FRACTION {
            warnings.push(Warning::Resolution {
                t,
                spectral_tail: diag.spectral_tail,
            });
            resolution_warned = true;
        }
        series.push(diag);
        snapshots.push(Snapshot { t, field });
    }
    Ok(Trajectory {
        problem: problem.clone(),
        snapshots,
        series,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::gagliardo_nirenberg_sup_bound;
    use crate::potentials::PotentialSpec;
    use crate::propagators::evolve_free;
    use crate::spectral::l2_norm_sq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gauss(grid: &Grid, amp: f64) -> ComplexField {
        ComplexField::from_real_fn(grid, |x| amp * (-x * x).exp()).unwrap()
    }

    fn step(grid: &Grid) -> SampledPotential {
        SampledPotential::from_spec(&PotentialSpec::gaussian_matched_step(2.0, 1.0), grid).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(128, 40.0).unwrap();
        let p = NlsProblem::new(&g, step(&g), 5.0, ComplexField::zeros(&g), 1e-2, 1.0)
            .with_record_spacing(0.25);
        let traj = solve(&p).unwrap();
        assert_eq!(traj.snapshots.len(), 5);
        assert!(traj.snapshots.iter().all(|s| s.field.is_zero()));
        assert_eq!(traj.snapshots[0].t, 0.0);
    }

    #[test]
    fn alpha_range_enforced() {
        let g = Grid::new(64, 20.0).unwrap();
        let p = NlsProblem::new(&g, SampledPotential::zero(&g), 3.0, gauss(&g, 0.1), 1e-2, 1.0);
        assert!(matches!(solve(&p), Err(SnlsError::Range(_))));
        let traj = solve(&p.permissive()).unwrap();
        assert!(traj.warnings.contains(&Warning::Exploratory { alpha: 3.0 }));
    }

    #[test]
    fn record_times_validated() {
        let g = Grid::new(64, 20.0).unwrap();
        let p = NlsProblem::new(&g, SampledPotential::zero(&g), 5.0, gauss(&g, 0.1), 1e-2, 1.0)
            .with_record_times(vec![0.5, 2.0]);
        assert!(solve(&p).is_err());
        let p = p.with_record_times(vec![0.7, 0.3]);
        assert!(solve(&p).is_err());
    }

    #[test]
    fn phase_substep_examples() {
        let g = Grid::new(64, 20.0).unwrap();
        let zero = ComplexField::zeros(&g);
        assert!(phase_substep(&zero, &vec![1.0; 64], 5.0, 0.1).unwrap().is_zero());

        let unit = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x)).unwrap();
        let out = phase_substep(&unit, &vec![0.0; 64], 5.0, 0.3).unwrap();
        let expect = unit.scaled(Complex64::from_polar(1.0, -0.3));
        for (a, b) in out.values().iter().zip(expect.values()) {
            assert!((a - b).norm() < 1e-15);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), 0.0))
            .collect();
        let f = ComplexField::new(&g, samples).unwrap();
        let f = f.axpy(Complex64::new(0.0, 0.5), &unit).unwrap();
        let out = phase_substep(&f, &vec![0.7; 64], 4.5, -0.2).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * b.norm());
        }

        let mut bad = f.clone();
        bad.values_mut()[0] = Complex64::new(f64::NAN, 0.0);
        assert!(phase_substep(&bad, &vec![0.0; 64], 5.0, 0.1).is_err());
    }

    #[test]
    fn modulus_power_paths_agree() {
        for &alpha in &[5.0, 6.0, 4.5, 5.3] {
            let pw = ModulusPower::new(alpha);
            for &s in &[0.0, 1e-3, 0.7, 2.5] {
                let exact = f64::powf(s, alpha / 2.0);
                assert!((pw.of_norm_sqr(s) - exact).abs() <= 1e-14 * exact.max(1e-300));
            }
        }
    }

    #[test]
    fn small_data_tracks_free_flow() {
        let g = Grid::new(1024, 200.0).unwrap();
        let u0 = gauss(&g, 0.01);
        let p = NlsProblem::new(&g, SampledPotential::zero(&g), 5.0, u0.clone(), 1e-2, 5.0);
        let traj = solve(&p).unwrap();
        let free = evolve_free(&u0, 5.0).unwrap();
        let d = l2_norm_sq(&traj.final_snapshot().field.try_sub(&free).unwrap())
            .unwrap()
            .sqrt();
        assert!(d < 1e-4, "distance {d}");
    }

    #[test]
    fn mass_conserved_over_many_steps() {
        let g = Grid::new(256, 40.0).unwrap();
        let p = NlsProblem::new(&g, step(&g), 5.0, gauss(&g, 1.0), 1e-3, 10.0).with_record_spacing(1.0);
        let traj = solve(&p).unwrap();
        assert!(traj.max_relative_mass_drift() < 1e-10);
    }

    #[test]
    fn time_reversal_recovers_data() {
        let g = Grid::new(512, 40.0).unwrap();
        let u0 = gauss(&g, 1.0);
        let v = step(&g);
        let fwd = evolve_nls(&u0, &v, Some(5.0), 1e-3, 1.0).unwrap();
        let back = evolve_nls(&fwd, &v, Some(5.0), 1e-3, -1.0).unwrap();
        let d = l2_norm_sq(&back.try_sub(&u0).unwrap()).unwrap().sqrt();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn sup_norm_below_gagliardo_nirenberg_bound() {
        let g = Grid::new(1024, 80.0).unwrap();
        let v = step(&g);
        let p = NlsProblem::new(&g, v, 5.0, gauss(&g, 1.5), 1e-3, 3.0).with_record_spacing(0.1);
        let traj = solve(&p).unwrap();
        let bound = traj
            .series
            .iter()
            .map(|d| gagliardo_nirenberg_sup_bound(d.mass, d.energy))
            .fold(0.0, f64::max);
        assert!(traj.series.iter().all(|d| d.sup_norm <= 2.0 * bound));
        assert!(traj.series.iter().all(|d| d.sup_norm <= bound * (1.0 + 1e-6)));
    }

    #[test]
    fn instability_guard_fires() {
        // wildly under-resolved stiff data with a huge step blows through the guard
        let g = Grid::new(64, 20.0).unwrap();
        let u0 = ComplexField::from_real_fn(&g, |x| 1e-3 * (-x * x).exp()).unwrap();
        let mut values = u0.values().to_vec();
        let pot = vec![0.0; 64];
        let mut stepper = Stepper::new(&g, &pot, Some(5.0), 0.1);
        let err = stepper.advance(&mut values, 1.0, Some(1e-9)).unwrap_err();
        assert!(matches!(err, SnlsError::Instability(_)));
        let mut nan = values.clone();
        nan[5] = Complex64::new(f64::NAN, 0.0);
        assert!(!guard_ok(&nan, None));
    }

    #[test]
    fn wrap_warning_attached() {
        let g = Grid::new(256, 20.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| Complex64::from_polar((-x * x).exp(), 4.0 * x)).unwrap();
        let p = NlsProblem::new(&g, SampledPotential::zero(&g), 5.0, u0, 1e-2, 2.0).with_record_spacing(0.5);
        let traj = solve(&p).unwrap();
        assert!(traj
            .warnings
            .iter()
            .any(|w| matches!(w, Warning::WrapAround { .. })));
    }

    #[test]
    fn uniform_time_grid() {
        let t = uniform_times(0.0, 1.0, 0.25);
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = uniform_times(1.0, 2.0, 0.3);
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 2.0);
    }
}
