//! C ABI for the lqot library.
//!
//! Matrices cross the boundary as row-major `double` arrays. Every fallible
//! call returns an [`LqotStatus`]; on failure the message is available from
//! [`lqot_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lqot::comparison::{distortion_coefficient, model_beta};
use lqot::cost::cost_matrices;
use lqot::dynamics::LqProblem;
use lqot::io::parse_problem;
use lqot::numerics::{matrix_from_row_slice, matrix_to_row_vec, Matrix, Vector};
use lqot::ot_discrete::{solve_kantorovich, DiscreteMeasure};
use lqot::ot_gaussian::{GaussianMeasure, LqGaussianTransport};
use lqot::verify::{run_suite, Suite, Tolerances, VerifyInputs};
use lqot::Error;

/// Status codes. Values 1 to 14 match the library error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqotStatus {
    Ok = 0,
    Dimension = 1,
    NonFinite = 2,
    NotSpd = 3,
    Singular = 4,
    ConjugateTime = 5,
    InvalidProblem = 6,
    Argument = 7,
    Guard = 8,
    Window = 9,
    Integration = 10,
    Interpolation = 11,
    Solver = 12,
    Io = 13,
    Parse = 14,
    NullPointer = 100,
    InvalidUtf8 = 101,
    Panic = 102,
}

impl From<&Error> for LqotStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => LqotStatus::Dimension,
            Error::NonFinite(_) => LqotStatus::NonFinite,
            Error::NotSpd(_) => LqotStatus::NotSpd,
            Error::Singular(_) => LqotStatus::Singular,
            Error::ConjugateTime(_) => LqotStatus::ConjugateTime,
            Error::InvalidProblem(_) => LqotStatus::InvalidProblem,
            Error::Argument(_) => LqotStatus::Argument,
            Error::Guard(_) => LqotStatus::Guard,
            Error::Window(_) => LqotStatus::Window,
            Error::Integration(_) => LqotStatus::Integration,
            Error::Interpolation(_) => LqotStatus::Interpolation,
            Error::Solver(_) => LqotStatus::Solver,
            Error::Io(_) => LqotStatus::Io,
            Error::Parse(_) => LqotStatus::Parse,
        }
    }
}

/// Opaque handle to a validated LQ problem.
pub struct LqotProblem {
    inner: LqProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Utf8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> LqotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            LqotStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            LqotStatus::from(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            LqotStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_last_error("string argument is not valid UTF-8".into());
            LqotStatus::InvalidUtf8
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LqotStatus::Panic
        }
    }
}

fn problem_ref<'a>(p: *const LqotProblem) -> FfiResult<&'a LqProblem> {
    // SAFETY: non-null handles come from lqot_problem_new / _from_json
    unsafe { p.as_ref() }.map(|h| &h.inner).ok_or(Failure::Null("problem"))
}

fn input<'a>(p: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller provides `len` readable doubles
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn output<'a>(p: *mut f64, len: usize, what: &'static str) -> FfiResult<&'a mut [f64]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller provides `len` writable doubles
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn write_scalar(out: *mut f64, value: f64, what: &'static str) -> FfiResult<()> {
    output(out, 1, what)?[0] = value;
    Ok(())
}

fn write_matrix(out: *mut f64, m: &Matrix, what: &'static str) -> FfiResult<()> {
    output(out, m.len(), what)?.copy_from_slice(&matrix_to_row_vec(m));
    Ok(())
}

fn vector(p: *const f64, n: usize, what: &'static str) -> FfiResult<Vector> {
    Ok(Vector::from_column_slice(input(p, n, what)?))
}

fn matrix(p: *const f64, rows: usize, cols: usize, what: &'static str) -> FfiResult<Matrix> {
    Ok(matrix_from_row_slice(rows, cols, input(p, rows * cols, what)?)?)
}

fn c_str<'a>(s: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if s.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller passes a nul-terminated string
    unsafe { CStr::from_ptr(s) }.to_str().map_err(|_| Failure::Utf8)
}

fn store_handle(out: *mut *mut LqotProblem, problem: LqProblem) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    // SAFETY: `out` is a valid pointer to a handle slot
    unsafe { *out = Box::into_raw(Box::new(LqotProblem { inner: problem })) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn lqot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a problem from row-major `A` (n x n), `B` (n x m), `Q` (n x n).
#[no_mangle]
pub extern "C" fn lqot_problem_new(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    q: *const f64,
    horizon: f64,
    out: *mut *mut LqotProblem,
) -> LqotStatus {
    guard(|| {
        let problem = LqProblem::new(matrix(a, n, n, "A")?, matrix(b, n, m, "B")?, matrix(q, n, n, "Q")?, horizon)?;
        store_handle(out, problem)
    })
}

/// Builds a problem from a JSON document `{"A", "B", "Q", "T"}`.
#[no_mangle]
pub extern "C" fn lqot_problem_from_json(json: *const c_char, out: *mut *mut LqotProblem) -> LqotStatus {
    guard(|| {
        let problem = parse_problem(c_str(json, "json")?)?;
        store_handle(out, problem)
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub extern "C" fn lqot_problem_free(problem: *mut LqotProblem) {
    if !problem.is_null() {
        // SAFETY: the handle was created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// State dimension, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn lqot_problem_dim(problem: *const LqotProblem) -> usize {
    problem_ref(problem).map_or(0, |p| p.dim())
}

/// Horizon `T`, or NaN for a null handle.
#[no_mangle]
pub extern "C" fn lqot_problem_horizon(problem: *const LqotProblem) -> f64 {
    problem_ref(problem).map_or(f64::NAN, |p| p.horizon())
}

/// Writes the four n x n flow blocks at `tau`.
#[no_mangle]
pub extern "C" fn lqot_flow_blocks(
    problem: *const LqotProblem,
    tau: f64,
    r1: *mut f64,
    r2: *mut f64,
    r3: *mut f64,
    r4: *mut f64,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if !tau.is_finite() {
            return Err(Error::NonFinite("tau".into()).into());
        }
        let fb = p.flow_blocks(tau);
        write_matrix(r1, &fb.r1, "r1")?;
        write_matrix(r2, &fb.r2, "r2")?;
        write_matrix(r3, &fb.r3, "r3")?;
        write_matrix(r4, &fb.r4, "r4")
    })
}

/// First conjugate time in `(0, search_horizon]`; `*found` is false when
/// there is none.
#[no_mangle]
pub extern "C" fn lqot_first_conjugate_time(
    problem: *const LqotProblem,
    search_horizon: f64,
    grid_step: f64,
    time: *mut f64,
    found: *mut bool,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let t = p.system().first_conjugate_time(search_horizon, grid_step)?;
        if found.is_null() {
            return Err(Failure::Null("found"));
        }
        write_scalar(time, t.unwrap_or(f64::NAN), "time")?;
        // SAFETY: checked non-null above
        unsafe { *found = t.is_some() };
        Ok(())
    })
}

/// Writes the n x n matrices of `c(x, y) = x.Cx/2 + x.Dy + y.Ey/2` on `[t, s]`.
#[no_mangle]
pub extern "C" fn lqot_cost_matrices(
    problem: *const LqotProblem,
    t: f64,
    s: f64,
    c: *mut f64,
    d: *mut f64,
    e: *mut f64,
) -> LqotStatus {
    guard(|| {
        let cm = cost_matrices(problem_ref(problem)?, t, s)?;
        write_matrix(c, &cm.c, "c")?;
        write_matrix(d, &cm.d, "d")?;
        write_matrix(e, &cm.e, "e")
    })
}

/// `c^{t,s}(x, y)` for length-n vectors.
#[no_mangle]
pub extern "C" fn lqot_cost_eval(
    problem: *const LqotProblem,
    t: f64,
    s: f64,
    x: *const f64,
    y: *const f64,
    value: *mut f64,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let n = p.dim();
        let cm = cost_matrices(p, t, s)?;
        write_scalar(value, cm.eval(&vector(x, n, "x")?, &vector(y, n, "y")?), "value")
    })
}

/// Endpoint `R3(tau) p + R4(tau) x` of the extremal with initial costate `p`.
#[no_mangle]
pub extern "C" fn lqot_exp_map(
    problem: *const LqotProblem,
    x: *const f64,
    costate: *const f64,
    tau: f64,
    out: *mut f64,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let n = p.dim();
        let y = p.exp_map(&vector(x, n, "x")?, &vector(costate, n, "costate")?, tau)?;
        output(out, n, "out")?.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// Distortion coefficient `det R3(tau) / det R3(T)`.
#[no_mangle]
pub extern "C" fn lqot_distortion(problem: *const LqotProblem, tau: f64, beta: *mut f64) -> LqotStatus {
    guard(|| write_scalar(beta, distortion_coefficient(problem_ref(problem)?, tau)?, "beta"))
}

/// Reference model-space coefficient for curvature sign `k`, dimension `n`.
#[no_mangle]
pub extern "C" fn lqot_model_beta(k: f64, n: usize, theta: f64, tau: f64, beta: *mut f64) -> LqotStatus {
    guard(|| write_scalar(beta, model_beta(k, n, theta, tau)?, "beta"))
}

/// Optimal plan between discrete measures on `[0, T]`. Points are row-major
/// (`n_source x dim`, `n_target x dim`); `plan` receives `n_source x n_target`
/// row-major masses.
#[no_mangle]
pub extern "C" fn lqot_solve_kantorovich(
    problem: *const LqotProblem,
    n_source: usize,
    source_points: *const f64,
    source_weights: *const f64,
    n_target: usize,
    target_points: *const f64,
    target_weights: *const f64,
    plan: *mut f64,
    total_cost: *mut f64,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let n = p.dim();
        let measure = |count: usize, pts: *const f64, w: *const f64| -> FfiResult<DiscreteMeasure> {
            let flat = input(pts, count * n, "points")?;
            let points = flat.chunks(n.max(1)).map(Vector::from_column_slice).collect();
            Ok(DiscreteMeasure::new(points, input(w, count, "weights")?.to_vec())?)
        };
        let mu = measure(n_source, source_points, source_weights)?;
        let nu = measure(n_target, target_points, target_weights)?;
        let cost = cost_matrices(p, 0.0, p.horizon())?.pairwise(mu.points(), nu.points());
        let sol = solve_kantorovich(&cost, &mu, &nu)?;
        write_matrix(plan, &sol.plan.matrix, "plan")?;
        write_scalar(total_cost, sol.total_cost, "total_cost")
    })
}

/// Optimal affine map `x -> linear x + offset` between Gaussians on `[0, T]`.
#[no_mangle]
pub extern "C" fn lqot_gaussian_map(
    problem: *const LqotProblem,
    mu_mean: *const f64,
    mu_cov: *const f64,
    nu_mean: *const f64,
    nu_cov: *const f64,
    linear: *mut f64,
    offset: *mut f64,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let n = p.dim();
        let mu = GaussianMeasure::new(vector(mu_mean, n, "mu_mean")?, matrix(mu_cov, n, n, "mu_cov")?)?;
        let nu = GaussianMeasure::new(vector(nu_mean, n, "nu_mean")?, matrix(nu_cov, n, n, "nu_cov")?)?;
        let tr = LqGaussianTransport::new(p, &mu, &nu, 0.0, p.horizon())?;
        write_matrix(linear, &tr.map.linear, "linear")?;
        output(offset, n, "offset")?.copy_from_slice(tr.map.offset.as_slice());
        Ok(())
    })
}

/// Runs a verification suite with default tolerances. `*report` receives a
/// JSON string to release with [`lqot_string_free`]; `*passed` the verdict.
#[no_mangle]
pub extern "C" fn lqot_verify(
    problem: *const LqotProblem,
    suite: *const c_char,
    seed: u64,
    report: *mut *mut c_char,
    passed: *mut bool,
) -> LqotStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let suite = Suite::parse(c_str(suite, "suite")?)?;
        if report.is_null() || passed.is_null() {
            return Err(Failure::Null("report"));
        }
        let r = run_suite(suite, p, &VerifyInputs::default(), seed, &Tolerances::default())?;
        let text = serde_json::to_string(&r).map_err(|e| Error::Io(e.to_string()))?;
        let c = CString::new(text).map_err(|e| Error::Io(e.to_string()))?;
        // SAFETY: both pointers checked non-null above
        unsafe {
            *passed = r.passed();
            *report = c.into_raw();
        }
        Ok(())
    })
}

/// Releases a string returned by the library. Null is ignored.
#[no_mangle]
pub extern "C" fn lqot_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string was created by CString::into_raw in this crate
        drop(unsafe { CString::from_raw(s) });
    }
}
