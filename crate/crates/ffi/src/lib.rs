//! C ABI over `splitsolve`.
//!
//! Problems and solutions are opaque heap handles created by `ss_*` constructors
//! and released with the matching `*_free`. Every fallible call returns an
//! [`SsStatus`]; on failure the message is available from
//! [`ss_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use splitsolve::config::parse_config;
use splitsolve::{Error, Grid, OperatorConfig, ProblemSpec, SchemeSolution};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    NonCoercive = 4,
    RadiusExhausted = 5,
    CflViolation = 6,
    StepMismatch = 7,
    OutOfRange = 8,
    PolicyNonConvergence = 9,
    DegenerateFit = 10,
    Expression = 11,
    Config = 12,
    Io = 13,
    Panic = 99,
}

impl From<&Error> for SsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonCoercive { .. } => SsStatus::NonCoercive,
            Error::RadiusExhausted { .. } => SsStatus::RadiusExhausted,
            Error::CflViolation { .. } => SsStatus::CflViolation,
            Error::StepMismatch { .. } => SsStatus::StepMismatch,
            Error::OutOfRange { .. } => SsStatus::OutOfRange,
            Error::PolicyNonConvergence { .. } => SsStatus::PolicyNonConvergence,
            Error::DegenerateFit(_) => SsStatus::DegenerateFit,
            Error::InvalidGrid(_) => SsStatus::InvalidGrid,
            Error::InvalidArgument(_) => SsStatus::InvalidArgument,
            Error::Expr(_) => SsStatus::Expression,
            Error::Config { .. } => SsStatus::Config,
            Error::Io { .. } => SsStatus::Io,
        }
    }
}

/// A PDE instance.
pub struct SsProblem {
    inner: ProblemSpec,
}

/// Time layers `t = 0, Δ, …, T` on a uniform grid.
pub struct SsSolution {
    inner: SchemeSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (SsStatus, String)>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside splitsolve".into());
            SsStatus::Panic
        }
    }
}

fn lift(e: Error) -> (SsStatus, String) {
    (SsStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (SsStatus, String) {
    (SsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (SsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn problem<'a>(p: *const SsProblem) -> Result<&'a ProblemSpec, (SsStatus, String)> {
    p.as_ref().map(|p| &p.inner).ok_or_else(|| null("problem"))
}

unsafe fn solution<'a>(s: *const SsSolution) -> Result<&'a SchemeSolution, (SsStatus, String)> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("solution"))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ss_status_name(status: SsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        SsStatus::Ok => c"ok",
        SsStatus::NullPointer => c"null pointer",
        SsStatus::InvalidArgument => c"invalid argument",
        SsStatus::InvalidGrid => c"invalid grid",
        SsStatus::NonCoercive => c"non-coercive Hamiltonian",
        SsStatus::RadiusExhausted => c"minimizer radius exhausted",
        SsStatus::CflViolation => c"CFL violation",
        SsStatus::StepMismatch => c"step does not divide horizon",
        SsStatus::OutOfRange => c"out of range",
        SsStatus::PolicyNonConvergence => c"policy iteration did not converge",
        SsStatus::DegenerateFit => c"degenerate fit",
        SsStatus::Expression => c"expression error",
        SsStatus::Config => c"config error",
        SsStatus::Io => c"I/O error",
        SsStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// Cole-Hopf benchmark: σ = 1, b = 0, H = p²/2, U = clamp(x, 0, k).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ss_problem_cole_hopf(k: f64, horizon: f64, out: *mut *mut SsProblem) -> SsStatus {
    guard(|| {
        let inner = ProblemSpec::cole_hopf(k, horizon).map_err(lift)?;
        put(out, SsProblem { inner })
    })
}

/// H = a·p + p²/2 with the Cole-Hopf coefficients and terminal datum.
///
/// # Safety
/// As [`ss_problem_cole_hopf`].
#[no_mangle]
pub unsafe extern "C" fn ss_problem_quadratic_drift(
    a: f64,
    k: f64,
    horizon: f64,
    out: *mut *mut SsProblem,
) -> SsStatus {
    guard(|| {
        let inner = ProblemSpec::quadratic_drift(a, k, horizon).map_err(lift)?;
        put(out, SsProblem { inner })
    })
}

/// H = p⁴/4 with the Cole-Hopf coefficients and terminal datum.
///
/// # Safety
/// As [`ss_problem_cole_hopf`].
#[no_mangle]
pub unsafe extern "C" fn ss_problem_quartic(k: f64, horizon: f64, out: *mut *mut SsProblem) -> SsStatus {
    guard(|| {
        let inner = ProblemSpec::quartic(k, horizon).map_err(lift)?;
        put(out, SsProblem { inner })
    })
}

/// Builds the problem described by the `[problem]` section of a config file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn ss_problem_from_config(path: *const c_char, out: *mut *mut SsProblem) -> SsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (SsStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let cfg = parse_config(Path::new(path)).map_err(lift)?;
        let inner = cfg.build_problem().map_err(lift)?;
        put(out, SsProblem { inner })
    })
}

/// Horizon `T` of a problem, or NaN for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_problem_horizon(problem: *const SsProblem) -> f64 {
    problem.as_ref().map_or(f64::NAN, |p| p.inner.horizon)
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_problem_free(problem: *mut SsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the splitting scheme with step `delta` on the grid
/// `x_min, x_min + h, …, x_max`.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_solve(
    problem: *const SsProblem,
    x_min: f64,
    x_max: f64,
    h: f64,
    delta: f64,
    out: *mut *mut SsSolution,
) -> SsStatus {
    guard(|| {
        let prob = self::problem(problem)?;
        let grid = Grid::from_range(x_min, x_max, h).map_err(lift)?;
        let inner = splitsolve::solve(prob, &grid, &OperatorConfig::new(delta)).map_err(lift)?;
        put(out, SsSolution { inner })
    })
}

/// Howard policy iteration on an implicit finite-difference scheme, with the
/// control set derived from the problem.
///
/// # Safety
/// As [`ss_solve`].
#[no_mangle]
pub unsafe extern "C" fn ss_howard_solve(
    problem: *const SsProblem,
    x_min: f64,
    x_max: f64,
    h: f64,
    delta: f64,
    out: *mut *mut SsSolution,
) -> SsStatus {
    guard(|| {
        let prob = self::problem(problem)?;
        let grid = Grid::from_range(x_min, x_max, h).map_err(lift)?;
        let cfg = splitsolve::HowardConfig::for_problem(prob, OperatorConfig::default().radius_safety)
            .map_err(lift)?;
        let inner = splitsolve::howard_fd_solve(prob, &grid, delta, &cfg).map_err(lift)?;
        put(out, SsSolution { inner })
    })
}

/// Value at `(t, x)`, interpolating linearly in space and using the terminal
/// layer inside the last step.
///
/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_solution_evaluate(
    solution: *const SsSolution,
    t: f64,
    x: f64,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let sol = self::solution(solution)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = sol.evaluate(t, x).map_err(lift)?;
        Ok(())
    })
}

/// Number of stored layers (`T/Δ + 1`), or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_solution_num_layers(solution: *const SsSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.layers.len())
}

/// Number of grid nodes per layer, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_solution_num_nodes(solution: *const SsSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.grid().len())
}

/// Copies layer `k` (time `kΔ`) into `buf`, which must hold `len` values with
/// `len` equal to [`ss_solution_num_nodes`].
///
/// # Safety
/// `solution` must be a live handle; `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_solution_layer(
    solution: *const SsSolution,
    k: usize,
    buf: *mut f64,
    len: usize,
) -> SsStatus {
    guard(|| {
        let sol = self::solution(solution)?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let layer = sol
            .layers
            .get(k)
            .ok_or_else(|| (SsStatus::OutOfRange, format!("layer {k} of {}", sol.layers.len())))?;
        if len != layer.values().len() {
            return Err((
                SsStatus::InvalidArgument,
                format!("buffer holds {len} values, layer has {}", layer.values().len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(layer.values());
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_solution_free(solution: *mut SsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Closed-form Cole-Hopf solution at `(t, x)` for `t < horizon`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_cole_hopf_exact(k: f64, horizon: f64, t: f64, x: f64, out: *mut f64) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let params = splitsolve::ColeHopfParams::new(k, horizon).map_err(lift)?;
        *out = splitsolve::cole_hopf_exact(&params, t, x).map_err(lift)?;
        Ok(())
    })
}

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn ss_normal_cdf(z: f64) -> f64 {
    splitsolve::normal_cdf(z)
}
