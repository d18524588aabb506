//! C ABI over the frac-cauchy toolkit.
//!
//! All objects are opaque handles created by `fc_*_new` / `fc_solve` and released
//! with the matching `fc_*_free`. Every fallible call returns an [`FcStatus`];
//! `fc_last_error` gives the message of the most recent failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use frac_cauchy::cli_io;
use frac_cauchy::contour::{ContourEvaluator, FamilyKind, HankelContour};
use frac_cauchy::linalg::{Complex, ComplexMatrix, ComplexVector};
use frac_cauchy::mild_solver::{self, Nonlinearity, ProblemSpec, SolveOutcome, SolveStatus};
use frac_cauchy::sectorial::{certify_sectorial, SampleGrid, Sector, DEFAULT_THETA};
use frac_cauchy::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SingularMatrix = 3,
    NoConvergence = 4,
    DomainError = 5,
    NotSectorial = 6,
    ContourError = 7,
    ConfigError = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FcFamily {
    Semigroup = 0,
    MittagLeffler = 1,
    MittagLefflerAlpha = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FcNonlinearity {
    Zero = 0,
    /// `f(u) = l·u` with the scalar `param_re + i·param_im`.
    Linear = 1,
    /// `f(u) = c·(u∘u)` with `c = param_re + i·param_im`.
    Quadratic = 2,
    Logistic = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FcSolveStatus {
    Completed = 0,
    Blowup = 1,
    PicardFailure = 2,
}

pub struct FcMatrix {
    inner: ComplexMatrix,
}

pub struct FcEvaluator {
    inner: ContourEvaluator,
    dim: usize,
}

pub struct FcSolution {
    inner: SolveOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: FcStatus, msg: impl Into<String>) -> FcStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> FcStatus {
    match e {
        Error::SingularMatrix { .. } => FcStatus::SingularMatrix,
        Error::NoConvergence { .. } => FcStatus::NoConvergence,
        Error::DomainError { .. } | Error::RadiusExceeded { .. } => FcStatus::DomainError,
        Error::ContourThroughSpectrum { .. } | Error::TruncationTooCoarse { .. } => FcStatus::ContourError,
        _ => FcStatus::InvalidArgument,
    }
}

fn from_err(e: Error) -> FcStatus {
    fail(status_of(&e), e.to_string())
}

fn guard(body: impl FnOnce() -> FcStatus) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => fail(FcStatus::Panic, "internal panic"),
    }
}

unsafe fn complex_slice(re: *const f64, im: *const f64, len: usize) -> Result<Vec<Complex>, FcStatus> {
    if re.is_null() {
        return Err(fail(FcStatus::NullPointer, "real part pointer is null"));
    }
    let re = std::slice::from_raw_parts(re, len);
    let im = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, len)) };
    Ok((0..len).map(|k| Complex::new(re[k], im.map_or(0.0, |s| s[k]))).collect())
}

fn certified_sector(a: &ComplexMatrix, theta: f64) -> Result<Sector, FcStatus> {
    let cert = certify_sectorial(a, theta, &SampleGrid::default()).map_err(from_err)?;
    if !cert.is_certified() {
        return Err(fail(FcStatus::NotSectorial, format!("sectoriality rejected at theta = {theta}")));
    }
    cert.sector().map_err(from_err)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn fc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build an `n × n` matrix from row-major real and imaginary parts. `im` may be NULL.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `n*n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_new(n: usize, re: *const f64, im: *const f64, out: *mut *mut FcMatrix) -> FcStatus {
    guard(|| {
        if out.is_null() {
            return fail(FcStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        if n == 0 {
            return fail(FcStatus::InvalidArgument, "dimension must be positive");
        }
        let entries = match n.checked_mul(n) {
            Some(len) => match complex_slice(re, im, len) {
                Ok(v) => v,
                Err(s) => return s,
            },
            None => return fail(FcStatus::InvalidArgument, "dimension overflow"),
        };
        let rows: Vec<Vec<Complex>> = entries.chunks(n).map(<[Complex]>::to_vec).collect();
        match ComplexMatrix::from_rows(&rows) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(FcMatrix { inner: m }));
                FcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `m` must be NULL or a handle from `fc_matrix_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_free(m: *mut FcMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of a matrix handle, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fc_matrix_dim(m: *const FcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// Sample the resolvent on the sector of half-angle `theta` (pass 0 for the default).
/// Writes the constant `M_θ`; returns `NotSectorial` if the certificate is rejected.
///
/// # Safety
/// `m` must be a live handle; `m_theta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_certify(m: *const FcMatrix, theta: f64, m_theta: *mut f64) -> FcStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), m_theta.is_null()) else {
            return fail(FcStatus::NullPointer, "null argument");
        };
        let theta = if theta == 0.0 { DEFAULT_THETA } else { theta };
        match certified_sector(&m.inner, theta) {
            Ok(s) => {
                *m_theta = s.m_theta();
                FcStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Certify `m` at the default angle and set up a contour evaluator for one family.
/// `alpha` is ignored for the semigroup.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_evaluator_new(
    m: *const FcMatrix,
    family: FcFamily,
    alpha: f64,
    out: *mut *mut FcEvaluator,
) -> FcStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(FcStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        let kind = match family {
            FcFamily::Semigroup => FamilyKind::Semigroup,
            FcFamily::MittagLeffler => FamilyKind::MittagLeffler,
            FcFamily::MittagLefflerAlpha => FamilyKind::MittagLefflerAlpha,
        };
        let sector = match certified_sector(&m.inner, DEFAULT_THETA) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let built = kind
            .at(if kind == FamilyKind::Semigroup { 1.0 } else { alpha })
            .and_then(|f| ContourEvaluator::new(&m.inner, &sector, &HankelContour::default(), f));
        match built {
            Ok(ev) => {
                *out = Box::into_raw(Box::new(FcEvaluator { inner: ev, dim: m.inner.rows() }));
                FcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `ev` must be NULL or a live evaluator handle.
#[no_mangle]
pub unsafe extern "C" fn fc_evaluator_free(ev: *mut FcEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Evaluate the family at `t >= 0`, writing `n*n` row-major entries to `re` and `im`.
///
/// # Safety
/// `ev` must be live; `re` and `im` must each hold `n*n` doubles.
#[no_mangle]
pub unsafe extern "C" fn fc_evaluator_eval(ev: *const FcEvaluator, t: f64, re: *mut f64, im: *mut f64) -> FcStatus {
    guard(|| {
        let Some(ev) = ev.as_ref() else {
            return fail(FcStatus::NullPointer, "evaluator is null");
        };
        if re.is_null() || im.is_null() {
            return fail(FcStatus::NullPointer, "output buffer is null");
        }
        match ev.inner.eval(t) {
            Ok(m) => {
                let n = ev.dim;
                let (re, im) = (std::slice::from_raw_parts_mut(re, n * n), std::slice::from_raw_parts_mut(im, n * n));
                for (k, z) in m.as_slice().iter().enumerate() {
                    re[k] = z.re;
                    im[k] = z.im;
                }
                FcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Solve the mild problem on `[0, horizon]` with uniform `step`.
/// `param_re/param_im` is the coefficient for `Linear` and `Quadratic`; `lipschitz_radius <= 0` selects the default.
///
/// # Safety
/// `m` must be live; `u0_re` (and `u0_im` when non-null) must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_solve(
    m: *const FcMatrix,
    u0_re: *const f64,
    u0_im: *const f64,
    alpha: f64,
    nonlinearity: FcNonlinearity,
    param_re: f64,
    param_im: f64,
    lipschitz_radius: f64,
    horizon: f64,
    step: f64,
    out: *mut *mut FcSolution,
) -> FcStatus {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(FcStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        let n = m.inner.rows();
        let u0 = match complex_slice(u0_re, u0_im, n) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let u0 = match ComplexVector::new(u0) {
            Ok(v) => v,
            Err(e) => return from_err(e),
        };
        let radius = if lipschitz_radius > 0.0 { lipschitz_radius } else { mild_solver::DEFAULT_LIPSCHITZ_RADIUS };
        let coeff = Complex::new(param_re, param_im);
        let f = match nonlinearity {
            FcNonlinearity::Zero => Ok(Nonlinearity::zero()),
            FcNonlinearity::Linear => Nonlinearity::linear(ComplexMatrix::identity(n).scale(coeff)),
            FcNonlinearity::Quadratic => Nonlinearity::quadratic(coeff, &u0, radius),
            FcNonlinearity::Logistic => Nonlinearity::logistic(&u0, radius),
        };
        let f = match f {
            Ok(f) => f,
            Err(e) => return from_err(e),
        };
        let sector = match certified_sector(&m.inner, DEFAULT_THETA) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let spec = ProblemSpec::new(m.inner.clone(), sector, u0, alpha, f, horizon, step);
        match mild_solver::solve(&spec) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(FcSolution { inner: sol }));
                FcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `s` must be NULL or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn fc_solution_free(s: *mut FcSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of stored time points (including `t = 0`), or 0 for NULL.
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fc_solution_len(s: *const FcSolution) -> usize {
    s.as_ref().map_or(0, |s| s.inner.grid.len())
}

/// Termination status; for blow-up and Picard failure `at` receives the time reported.
///
/// # Safety
/// `s` must be live; `at` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn fc_solution_status(
    s: *const FcSolution,
    status: *mut FcSolveStatus,
    at: *mut f64,
) -> FcStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), status.is_null()) else {
            return fail(FcStatus::NullPointer, "null argument");
        };
        let (code, time) = match s.inner.status {
            SolveStatus::Completed => (FcSolveStatus::Completed, f64::NAN),
            SolveStatus::Blowup { omega_estimate } => (FcSolveStatus::Blowup, omega_estimate),
            SolveStatus::PicardFailure { at } => (FcSolveStatus::PicardFailure, at),
        };
        *status = code;
        if !at.is_null() {
            *at = time;
        }
        FcStatus::Ok
    })
}

/// Read time point `index`: its time and `n` state components.
///
/// # Safety
/// `s` must be live; `t` must be writable; `re` and `im` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn fc_solution_get(
    s: *const FcSolution,
    index: usize,
    t: *mut f64,
    re: *mut f64,
    im: *mut f64,
) -> FcStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(FcStatus::NullPointer, "solution is null");
        };
        if t.is_null() || re.is_null() || im.is_null() {
            return fail(FcStatus::NullPointer, "output buffer is null");
        }
        let Some(v) = s.inner.values.get(index) else {
            return fail(FcStatus::InvalidArgument, format!("index {index} out of range"));
        };
        *t = s.inner.grid[index];
        let (re, im) = (std::slice::from_raw_parts_mut(re, v.len()), std::slice::from_raw_parts_mut(im, v.len()));
        for (k, z) in v.as_slice().iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        FcStatus::Ok
    })
}

/// Run a JSON config exactly like the command-line tool, writing outputs to `out_dir`.
/// `exit_code` receives the CLI exit code (0 success, 2 rejected certificate or partial sweep).
///
/// # Safety
/// `config_json` and `out_dir` must be NUL-terminated strings; `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_run_config(
    config_json: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> FcStatus {
    guard(|| {
        if config_json.is_null() || out_dir.is_null() || exit_code.is_null() {
            return fail(FcStatus::NullPointer, "null argument");
        }
        let (Ok(text), Ok(dir)) = (CStr::from_ptr(config_json).to_str(), CStr::from_ptr(out_dir).to_str()) else {
            return fail(FcStatus::InvalidArgument, "strings must be UTF-8");
        };
        let cfg = match cli_io::parse_config(text) {
            Ok(c) => c,
            Err(e) => return fail(FcStatus::ConfigError, e.to_string()),
        };
        let report = match cli_io::run(&cfg) {
            Ok(r) => r,
            Err(cli_io::CliError::Numeric(e)) => return from_err(e),
            Err(e) => return fail(FcStatus::ConfigError, e.to_string()),
        };
        if let Err(e) = report.write(Path::new(dir)) {
            return fail(FcStatus::Io, e.to_string());
        }
        *exit_code = report.exit_code;
        FcStatus::Ok
    })
}
