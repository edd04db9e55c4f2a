//! C ABI over `drsplit`.
//!
//! Every fallible call returns a [`DrsStatus`]. On failure the message is kept
//! per thread and can be read with [`drs_last_error`]. Handles are opaque and
//! must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use drsplit::engine::{DrParams, RunResult, Solver, Variant};
use drsplit::hilbert::Weights;
use drsplit::planner::{naive_stepsize, optimal_delta, Case, PlannerInput, PlannerResult};
use drsplit::problem::{parse_problem, ProblemSpec};
use drsplit::prox::prox_phi_scalar;
use drsplit::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrsStatus {
    Ok = 0,
    InvalidArgument = 1,
    Unsupported = 2,
    NullPointer = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrsCase {
    MonotoneB = 0,
    NonmonotoneA = 1,
    Unsupported = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DrsVariant {
    /// Use the problem's variant, or FG when it has none.
    Default = 0,
    Fg = 1,
    Gf = 2,
}

/// Solver settings. NaN in `mu` or `lambda` means "not set".
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DrsSolveOptions {
    pub mu: f64,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub variant: DrsVariant,
}

pub struct DrsPlan {
    inner: PlannerResult,
}

pub struct DrsProblem {
    inner: ProblemSpec,
}

pub struct DrsRun {
    inner: RunResult,
    lambda: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> DrsStatus {
    match err {
        Error::Unsupported(_) => DrsStatus::Unsupported,
        Error::InnerSolve { .. } | Error::Singular | Error::Eigen | Error::NoRoot { .. } | Error::NotEvaluable(_) => {
            DrsStatus::Numerical
        }
        _ => DrsStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DrsStatus, String)>) -> DrsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside drsplit");
            DrsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (DrsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DrsStatus, String) {
    (DrsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (DrsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `src` into `buf` up to `len` values and returns `src.len()`.
unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> usize {
    if !buf.is_null() {
        let n = src.len().min(len);
        ptr::copy_nonoverlapping(src.as_ptr(), buf, n);
    }
    src.len()
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next `drs_*` call on the same thread.
#[no_mangle]
pub extern "C" fn drs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn drs_solve_options_default() -> DrsSolveOptions {
    DrsSolveOptions {
        mu: f64::NAN,
        lambda: f64::NAN,
        tol: drsplit::engine::DEFAULT_TOL,
        max_iter: drsplit::engine::DEFAULT_MAX_ITER,
        variant: DrsVariant::Default,
    }
}

/// Plans the largest certified step for `sigmas`.
///
/// `weights` covers the first `m - 1` operators and may be null for equal
/// weights.
///
/// # Safety
/// `sigmas` must point to `m` doubles, `weights` to `m - 1` doubles or be null,
/// and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drs_plan_new(
    sigmas: *const f64,
    weights: *const f64,
    m: usize,
    mu: f64,
    out: *mut *mut DrsPlan,
) -> DrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = slice(sigmas, m, "sigmas")?.to_vec();
        if m < 2 {
            return Err((DrsStatus::InvalidArgument, format!("need at least two operators, got {m}")));
        }
        let w = if weights.is_null() {
            Weights::equal(m - 1)
        } else {
            Weights::new(slice(weights, m - 1, "weights")?.to_vec())
        }
        .map_err(lib_err)?;
        let inp = PlannerInput::new(s, w, mu).map_err(lib_err)?;
        let inner = optimal_delta(&inp).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DrsPlan { inner }));
        Ok(())
    })
}

/// `λ̄*`; infinite in the monotone case. NaN for a null handle.
///
/// # Safety
/// `plan` must be null or a handle from [`drs_plan_new`].
#[no_mangle]
pub unsafe extern "C" fn drs_plan_lambda_bar(plan: *const DrsPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| p.inner.lambda_bar_star)
}

/// # Safety
/// `plan` must be a handle from [`drs_plan_new`].
#[no_mangle]
pub unsafe extern "C" fn drs_plan_case(plan: *const DrsPlan) -> DrsCase {
    match plan.as_ref().map(|p| p.inner.case) {
        Some(Case::MonotoneB) => DrsCase::MonotoneB,
        Some(Case::NonmonotoneA) => DrsCase::NonmonotoneA,
        _ => DrsCase::Unsupported,
    }
}

/// Writes up to `len` entries of `δ*` into `buf` and returns its full length.
/// Returns 0 in the monotone case.
///
/// # Safety
/// `plan` must be a handle from [`drs_plan_new`]; `buf` must hold `len`
/// doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn drs_plan_delta(plan: *const DrsPlan, buf: *mut f64, len: usize) -> usize {
    match plan.as_ref().and_then(|p| p.inner.delta_star.as_deref()) {
        Some(d) => copy_out(d, buf, len),
        None => 0,
    }
}

/// # Safety
/// `plan` must be null or a handle from [`drs_plan_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn drs_plan_free(plan: *mut DrsPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// The baseline equal-weight step.
///
/// # Safety
/// `sigmas` must point to `m` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drs_naive_stepsize(sigmas: *const f64, m: usize, mu: f64, out: *mut f64) -> DrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = slice(sigmas, m, "sigmas")?;
        *out = naive_stepsize(s, mu).map_err(lib_err)?;
        Ok(())
    })
}

/// Scalar prox of `kappa * phi(·, omega)` at `t`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drs_prox_phi_scalar(t: f64, omega: f64, kappa: f64, out: *mut f64) -> DrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = prox_phi_scalar(t, omega, kappa).map_err(lib_err)?;
        Ok(())
    })
}

/// Parses a problem from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drs_problem_from_json(json: *const c_char, out: *mut *mut DrsProblem) -> DrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (DrsStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let inner = parse_problem(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DrsProblem { inner }));
        Ok(())
    })
}

/// Number of operators in the problem, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a handle from [`drs_problem_from_json`].
#[no_mangle]
pub unsafe extern "C" fn drs_problem_operator_count(problem: *const DrsProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.weights.len())
}

/// # Safety
/// `problem` must be null or a handle from [`drs_problem_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn drs_problem_free(problem: *mut DrsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, fallback: T) -> T {
    flag.or(file).unwrap_or(fallback)
}

fn set(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Runs Douglas–Rachford on `problem`.
///
/// An unset `lambda` falls back to the problem file, then to 0.95 `λ̄*`,
/// then to 1 when every operator is monotone. Reaching `max_iter` is not an
/// error; check [`drs_run_converged`].
///
/// # Safety
/// `problem` must be a live handle, `options` valid or null for defaults,
/// and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn drs_solve(
    problem: *const DrsProblem,
    options: *const DrsSolveOptions,
    out: *mut *mut DrsRun,
) -> DrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        let opts = options.as_ref().copied().unwrap_or_else(|| drs_solve_options_default());
        let mu = pick(set(opts.mu), spec.mu, 1.0);
        let variant = match opts.variant {
            DrsVariant::Fg => Variant::FG,
            DrsVariant::Gf => Variant::GF,
            DrsVariant::Default => spec.variant.unwrap_or_default(),
        };
        let lambda = match set(opts.lambda).or(spec.lambda) {
            Some(l) => l,
            None => {
                let inp = PlannerInput::new(spec.problem.sigmas(), spec.weights.clone(), mu).map_err(lib_err)?;
                let plan = optimal_delta(&inp).map_err(lib_err)?;
                if plan.lambda_bar_star.is_finite() {
                    0.95 * plan.lambda_bar_star
                } else {
                    1.0
                }
            }
        };
        let mut params = DrParams::new(spec.weights.clone(), lambda, mu);
        params.tol = opts.tol;
        params.max_iter = opts.max_iter;
        params.variant = variant;
        let solver = Solver::new(&spec.problem, params).map_err(lib_err)?;
        let inner = solver.run(spec.x0.clone()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DrsRun { inner, lambda }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from [`drs_solve`].
#[no_mangle]
pub unsafe extern "C" fn drs_run_iterations(run: *const DrsRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.iterations)
}

/// # Safety
/// `run` must be null or a handle from [`drs_solve`].
#[no_mangle]
pub unsafe extern "C" fn drs_run_converged(run: *const DrsRun) -> bool {
    run.as_ref().is_some_and(|r| r.inner.converged)
}

/// # Safety
/// `run` must be null or a handle from [`drs_solve`].
#[no_mangle]
pub unsafe extern "C" fn drs_run_residual(run: *const DrsRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.inner.final_residual)
}

/// The step `λ` actually used.
///
/// # Safety
/// `run` must be null or a handle from [`drs_solve`].
#[no_mangle]
pub unsafe extern "C" fn drs_run_lambda(run: *const DrsRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.lambda)
}

/// Writes up to `len` shadow entries into `buf` and returns the full length.
/// Matrices are row-major.
///
/// # Safety
/// `run` must be a handle from [`drs_solve`]; `buf` must hold `len` doubles
/// or be null.
#[no_mangle]
pub unsafe extern "C" fn drs_run_shadow(run: *const DrsRun, buf: *mut f64, len: usize) -> usize {
    match run.as_ref() {
        Some(r) => copy_out(r.inner.shadow.as_slice(), buf, len),
        None => 0,
    }
}

/// Iterate log as CSV text, or null on failure. Release with [`drs_string_free`].
///
/// # Safety
/// `run` must be a handle from [`drs_solve`].
#[no_mangle]
pub unsafe extern "C" fn drs_run_log_csv(run: *const DrsRun) -> *mut c_char {
    let mut text = None;
    let status = guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let csv = r.inner.log.to_csv_string().map_err(lib_err)?;
        text = Some(CString::new(csv).map_err(|e| (DrsStatus::InvalidArgument, e.to_string()))?);
        Ok(())
    });
    match (status, text) {
        (DrsStatus::Ok, Some(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `run` must be null or a handle from [`drs_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn drs_run_free(run: *mut DrsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn drs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
