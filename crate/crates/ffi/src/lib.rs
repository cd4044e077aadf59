//! C ABI for the snls toolkit.
//!
//! Grids, fields and propagators are opaque heap handles created by
//! `snls_*_new` and released by the matching `snls_*_free`. Every fallible
//! call returns an [`SnlsStatus`]; on failure the message is kept per thread
//! and can be read with [`snls_last_error_message`]. Complex data crosses the
//! boundary as interleaved `(re, im)` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use snls::cli_io::{read_checkpoint, write_checkpoint};
use snls::diagnostics;
use snls::nls::evolve_nls;
use snls::potentials::{PotentialSpec, SampledPotential};
use snls::propagators::{evolve_free, evolve_shifted, PerturbedPropagator};
use snls::spectral::{ComplexField, Grid};
use snls::SnlsError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Instability = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnlsPotentialFamily {
    GaussianMatchedStep = 0,
    LogisticStep = 1,
    Flat = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnlsMethod {
    StrangSplitting = 0,
    Eigendecomposition = 1,
}

/// Opaque periodic grid.
pub struct SnlsGrid {
    inner: Grid,
}

/// Opaque complex field on a grid.
pub struct SnlsField {
    inner: ComplexField,
}

/// Opaque perturbed linear propagator.
pub struct SnlsPropagator {
    inner: PerturbedPropagator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum FfiError {
    Null(&'static str),
    Core(SnlsError),
}

impl From<SnlsError> for FfiError {
    fn from(e: SnlsError) -> Self {
        FfiError::Core(e)
    }
}

fn status_of(e: &FfiError) -> SnlsStatus {
    let e = match e {
        FfiError::Null(_) => return SnlsStatus::NullPointer,
        FfiError::Core(e) => e,
    };
    match e {
        SnlsError::Dimension(_) => SnlsStatus::DimensionMismatch,
        SnlsError::Instability(_) => SnlsStatus::Instability,
        SnlsError::Io(_) => SnlsStatus::Io,
        SnlsError::Format(_) => SnlsStatus::Format,
        _ => SnlsStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> SnlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnlsStatus::Ok,
        Ok(Err(e)) => {
            set_error(match &e {
                FfiError::Null(what) => format!("null pointer: {what}"),
                FfiError::Core(e) => e.to_string(),
            });
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside snls".into());
            SnlsStatus::Panic
        }
    }
}

fn null(what: &'static str) -> FfiError {
    FfiError::Null(what)
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], FfiError> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

fn check_len(got: usize, want: usize, what: &'static str) -> Result<(), FfiError> {
    if got != want {
        return Err(SnlsError::Dimension(format!("{what}: length {got}, expected {want}")).into());
    }
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, FfiError> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| SnlsError::Parameter("path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn snls_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snls_grid_new(n_points: usize, length: f64, out: *mut *mut SnlsGrid) -> SnlsStatus {
    guard(|| {
        let inner = Grid::new(n_points, length)?;
        put(out, SnlsGrid { inner })
    })
}

/// # Safety
/// `grid` must be null or come from [`snls_grid_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn snls_grid_free(grid: *mut SnlsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snls_grid_n_points(grid: *const SnlsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.inner.n_points())
}

/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snls_grid_length(grid: *const SnlsGrid) -> f64 {
    grid.as_ref().map_or(f64::NAN, |g| g.inner.length())
}

/// Writes the `n_points` grid coordinates.
///
/// # Safety
/// `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snls_grid_x(grid: *const SnlsGrid, out: *mut f64, len: usize) -> SnlsStatus {
    guard(|| {
        let g = &get(grid, "grid")?.inner;
        check_len(len, g.n_points(), "x buffer")?;
        slice_mut(out, len, "out")?.copy_from_slice(g.x());
        Ok(())
    })
}

/// Samples a potential family on the grid into `out` (`n_points` doubles).
///
/// # Safety
/// `grid` must be live; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snls_build_potential(
    grid: *const SnlsGrid,
    family: SnlsPotentialFamily,
    height: f64,
    width: f64,
    a_minus: f64,
    a_plus: f64,
    out: *mut f64,
    len: usize,
) -> SnlsStatus {
    guard(|| {
        let g = &get(grid, "grid")?.inner;
        check_len(len, g.n_points(), "potential buffer")?;
        let mut spec = match family {
            SnlsPotentialFamily::GaussianMatchedStep => PotentialSpec::gaussian_matched_step(height, width),
            SnlsPotentialFamily::LogisticStep => PotentialSpec::logistic_step(width),
            SnlsPotentialFamily::Flat => PotentialSpec::flat(a_minus),
        };
        spec.a_minus = a_minus;
        if family != SnlsPotentialFamily::Flat {
            spec.a_plus = a_plus;
        }
        let v = snls::potentials::build_potential(&spec, g)?;
        slice_mut(out, len, "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Builds a field from `2 * n_points` interleaved doubles.
///
/// # Safety
/// `grid` must be live; `values` must point to `len` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_field_new(
    grid: *const SnlsGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut SnlsField,
) -> SnlsStatus {
    guard(|| {
        let g = &get(grid, "grid")?.inner;
        check_len(len, 2 * g.n_points(), "field values")?;
        let v = slice(values, len, "values")?;
        let data = v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let inner = ComplexField::new(g, data)?;
        put(out, SnlsField { inner })
    })
}

/// # Safety
/// `field` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn snls_field_free(field: *mut SnlsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of complex samples, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snls_field_len(field: *const SnlsField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.values().len())
}

/// Copies the samples as interleaved doubles (`2 * n_points`).
///
/// # Safety
/// `field` must be live; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snls_field_values(field: *const SnlsField, out: *mut f64, len: usize) -> SnlsStatus {
    guard(|| {
        let f = &get(field, "field")?.inner;
        check_len(len, 2 * f.values().len(), "output buffer")?;
        let out = slice_mut(out, len, "out")?;
        for (c, v) in out.chunks_exact_mut(2).zip(f.values()) {
            c[0] = v.re;
            c[1] = v.im;
        }
        Ok(())
    })
}

/// `∫|f|²`.
///
/// # Safety
/// `field` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_field_mass(field: *const SnlsField, out: *mut f64) -> SnlsStatus {
    guard(|| {
        let m = diagnostics::mass(&get(field, "field")?.inner)?;
        write_out(out, m)
    })
}

/// Energy with potential samples `v` (`n_points` doubles). A negative
/// `alpha` drops the nonlinear term.
///
/// # Safety
/// `field` must be live; `v` must point to `len` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_field_energy(
    field: *const SnlsField,
    v: *const f64,
    len: usize,
    alpha: f64,
    out: *mut f64,
) -> SnlsStatus {
    guard(|| {
        let f = &get(field, "field")?.inner;
        check_len(len, f.values().len(), "potential")?;
        let v = slice(v, len, "v")?;
        let alpha = (alpha >= 0.0).then_some(alpha);
        write_out(out, diagnostics::energy_with(f, v, alpha)?)
    })
}

/// # Safety
/// `grid` must be live; `v` must point to `len` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_propagator_new(
    grid: *const SnlsGrid,
    v: *const f64,
    len: usize,
    method: SnlsMethod,
    dt: f64,
    out: *mut *mut SnlsPropagator,
) -> SnlsStatus {
    guard(|| {
        let g = &get(grid, "grid")?.inner;
        check_len(len, g.n_points(), "potential")?;
        let pot = SampledPotential::from_samples(g, slice(v, len, "v")?.to_vec())?;
        let inner = match method {
            SnlsMethod::StrangSplitting => PerturbedPropagator::strang(g, pot, dt)?,
            SnlsMethod::Eigendecomposition => {
                PerturbedPropagator::eigen(g, pot, snls::propagators::OracleStencil::FourierCollocation)?
            }
        };
        put(out, SnlsPropagator { inner })
    })
}

/// # Safety
/// `p` must be null or come from [`snls_propagator_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn snls_propagator_free(p: *mut SnlsPropagator) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `e^{it(Δ-V)} f` as a new field.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_propagator_evolve(
    p: *const SnlsPropagator,
    field: *const SnlsField,
    t: f64,
    out: *mut *mut SnlsField,
) -> SnlsStatus {
    guard(|| {
        let inner = get(p, "propagator")?.inner.evolve(&get(field, "field")?.inner, t)?;
        put(out, SnlsField { inner })
    })
}

/// `e^{itΔ} f`.
///
/// # Safety
/// `field` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_evolve_free(field: *const SnlsField, t: f64, out: *mut *mut SnlsField) -> SnlsStatus {
    guard(|| {
        let inner = evolve_free(&get(field, "field")?.inner, t)?;
        put(out, SnlsField { inner })
    })
}

/// `e^{it(Δ-1)} f`.
///
/// # Safety
/// `field` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_evolve_shifted(field: *const SnlsField, t: f64, out: *mut *mut SnlsField) -> SnlsStatus {
    guard(|| {
        let inner = evolve_shifted(&get(field, "field")?.inner, t)?;
        put(out, SnlsField { inner })
    })
}

/// Nonlinear Strang flow over `[0, t]` with substep `dt`. A negative `alpha`
/// runs the linear equation.
///
/// # Safety
/// `field` must be live; `v` must point to `len` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn snls_evolve_nls(
    field: *const SnlsField,
    v: *const f64,
    len: usize,
    alpha: f64,
    dt: f64,
    t: f64,
    out: *mut *mut SnlsField,
) -> SnlsStatus {
    guard(|| {
        let f = &get(field, "field")?.inner;
        check_len(len, f.values().len(), "potential")?;
        let pot = SampledPotential::from_samples(f.grid(), slice(v, len, "v")?.to_vec())?;
        let alpha = (alpha >= 0.0).then_some(alpha);
        let inner = evolve_nls(f, &pot, alpha, dt, t)?;
        put(out, SnlsField { inner })
    })
}

/// The `(r, p, q)` exponents attached to `α > 4`.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn snls_exponents(alpha: f64, r: *mut f64, p: *mut f64, q: *mut f64) -> SnlsStatus {
    guard(|| {
        let e = diagnostics::exponents(alpha)?;
        write_out(r, e.r)?;
        write_out(p, e.p)?;
        write_out(q, e.q)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `field` live.
#[no_mangle]
pub unsafe extern "C" fn snls_checkpoint_write(path: *const c_char, field: *const SnlsField, time: f64) -> SnlsStatus {
    guard(|| Ok(write_checkpoint(path_arg(path)?, &get(field, "field")?.inner, time)?))
}

/// Reads a checkpoint into a new field (on its own grid) and its time.
///
/// # Safety
/// `path` must be a NUL-terminated string; output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn snls_checkpoint_read(
    path: *const c_char,
    out_field: *mut *mut SnlsField,
    out_time: *mut f64,
) -> SnlsStatus {
    guard(|| {
        let ck = read_checkpoint(path_arg(path)?)?;
        write_out(out_time, ck.time)?;
        put(out_field, SnlsField { inner: ck.field })
    })
}
