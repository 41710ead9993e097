//! C ABI over the `predprey` library.
//!
//! Every function returns a status code (`PP_OK` on success) and writes
//! results through out-pointers. Objects are opaque and owned by the
//! caller once created; release them with the matching `*_free`. The text of
//! the most recent failure on the calling thread is available from
//! [`pp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use predprey::bifurcation;
use predprey::equilibria::{self, Equilibrium, DEFAULT_SCAN_POINTS};
use predprey::error::Error;
use predprey::extinction;
use predprey::integrator::{self, IntegratorOptions, Termination, Trajectory};
use predprey::model::{self, ModelParams, State};

pub const PP_OK: i32 = 0;
pub const PP_NULL_POINTER: i32 = -1;
pub const PP_INVALID_PARAMS: i32 = -2;
pub const PP_DOMAIN: i32 = -3;
pub const PP_PRECONDITION: i32 = -4;
pub const PP_INTEGRATION: i32 = -5;
pub const PP_OUT_OF_RANGE: i32 = -6;
pub const PP_PANIC: i32 = -7;
pub const PP_INVALID_OPTIONS: i32 = -8;
pub const PP_NOT_FOUND: i32 = -9;

pub const PP_TERM_HORIZON: i32 = 0;
pub const PP_TERM_PREY_EXTINCT: i32 = 1;
pub const PP_TERM_PREDATOR_EXTINCT: i32 = 2;
pub const PP_TERM_STOPPED: i32 = 3;
pub const PP_TERM_STEP_FAILURE: i32 = 4;

/// Validated model parameters.
pub struct PpParams(ModelParams);

/// A computed trajectory.
pub struct PpTrajectory(Trajectory);

/// Interior equilibria with their linearization.
pub struct PpEquilibria(Vec<Equilibrium>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::InvalidParams(_) => PP_INVALID_PARAMS,
        Error::Domain(_) => PP_DOMAIN,
        Error::Precondition(_) => PP_PRECONDITION,
        Error::Options(_) => PP_INVALID_OPTIONS,
        Error::Integration { .. } => PP_INTEGRATION,
        Error::NotFound(_) => PP_NOT_FOUND,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PP_NULL_POINTER, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PP_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            PP_PANIC
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message for the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Validates parameters and creates a handle. `r` is the refuge factor; pass
/// 1 for no refuge.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pp_params_new(
    a1: f64,
    a2: f64,
    b1: f64,
    w0: f64,
    w1: f64,
    d: f64,
    m1: f64,
    m2: f64,
    r: f64,
    out: *mut *mut PpParams,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = model::validate_params(&ModelParams { a1, a2, b1, w0, w1, d, m1, m2, r })?;
        out.write(Box::into_raw(Box::new(PpParams(p))));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `pp_params_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_params_free(p: *mut PpParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Carrying capacity `a1 / b1`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_params_carrying_capacity(p: *const PpParams, out: *mut f64) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        write(out, p.0.carrying_capacity(), "out")
    })
}

/// Vector field at `(x1, x2)`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_rhs(p: *const PpParams, x1: f64, x2: f64, dx1: *mut f64, dx2: *mut f64) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        if dx1.is_null() || dx2.is_null() {
            return Err(null("output"));
        }
        let f = model::rhs(State::new(x1, x2), &p.0)?;
        dx1.write(f.x1);
        dx2.write(f.x2);
        Ok(())
    })
}

/// Integrates from `(x1, x2)` up to `horizon` with default tolerances.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_integrate(
    p: *const PpParams,
    x1: f64,
    x2: f64,
    horizon: f64,
    out: *mut *mut PpTrajectory,
) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = IntegratorOptions::default().with_horizon(horizon);
        let t = integrator::integrate(&p.0, State::new(x1, x2), &opts)?;
        out.write(Box::into_raw(Box::new(PpTrajectory(t))));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from `pp_integrate` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_free(t: *mut PpTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stored samples.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_len(t: *const PpTrajectory, out: *mut usize) -> i32 {
    guard(|| write(out, deref(t, "trajectory")?.0.len(), "out"))
}

/// Sample `i` as `(t, x1, x2)`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_get(
    t: *const PpTrajectory,
    i: usize,
    time: *mut f64,
    x1: *mut f64,
    x2: *mut f64,
) -> i32 {
    guard(|| {
        let t = &deref(t, "trajectory")?.0;
        if i >= t.len() {
            return Err(Fail(PP_OUT_OF_RANGE, format!("index {i} out of range for {} samples", t.len())));
        }
        write(time, t.times[i], "time")?;
        write(x1, t.states[i].x1, "x1")?;
        write(x2, t.states[i].x2, "x2")
    })
}

/// Termination kind (`PP_TERM_*`) and event time (NaN for the horizon).
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_trajectory_termination(t: *const PpTrajectory, kind: *mut i32, time: *mut f64) -> i32 {
    guard(|| {
        let term = &deref(t, "trajectory")?.0.termination;
        let k = match term {
            Termination::HorizonReached => PP_TERM_HORIZON,
            Termination::PreyExtinct { .. } => PP_TERM_PREY_EXTINCT,
            Termination::PredatorExtinct { .. } => PP_TERM_PREDATOR_EXTINCT,
            Termination::Stopped { .. } => PP_TERM_STOPPED,
            Termination::StepFailure { .. } => PP_TERM_STEP_FAILURE,
        };
        write(kind, k, "kind")?;
        write(time, term.time().unwrap_or(f64::NAN), "time")
    })
}

/// Interior equilibria, sorted by `x1`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_interior_equilibria(p: *const PpParams, out: *mut *mut PpEquilibria) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let eqs = equilibria::interior_equilibria(&p.0, DEFAULT_SCAN_POINTS)?;
        out.write(Box::into_raw(Box::new(PpEquilibria(eqs))));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle from `pp_interior_equilibria` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_equilibria_free(e: *mut PpEquilibria) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_equilibria_len(e: *const PpEquilibria, out: *mut usize) -> i32 {
    guard(|| write(out, deref(e, "equilibria")?.0.len(), "out"))
}

/// Equilibrium `i`: location, Jacobian trace and determinant.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_equilibria_get(
    e: *const PpEquilibria,
    i: usize,
    x1: *mut f64,
    x2: *mut f64,
    trace: *mut f64,
    det: *mut f64,
) -> i32 {
    guard(|| {
        let eqs = &deref(e, "equilibria")?.0;
        let eq = eqs
            .get(i)
            .ok_or_else(|| Fail(PP_OUT_OF_RANGE, format!("index {i} out of range for {} equilibria", eqs.len())))?;
        write(x1, eq.point.x1, "x1")?;
        write(x2, eq.point.x2, "x2")?;
        write(trace, eq.trace().unwrap_or(f64::NAN), "trace")?;
        write(det, eq.det().unwrap_or(f64::NAN), "det")
    })
}

/// Predator bound `K2` for prey margin `eps1`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_dissipative_bound_k2(p: *const PpParams, eps1: f64, out: *mut f64) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        write(out, extinction::dissipative_bound_k2(&p.0, eps1)?.1, "out")
    })
}

/// Refuge level below which prey starting at `x1_0` persists, given `K2`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_refuge_threshold(p: *const PpParams, x1_0: f64, k2: f64, out: *mut f64) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        write(out, extinction::refuge_threshold(x1_0, &p.0, k2)?.r_star, "out")
    })
}

/// Whether initial prey `x1_0` meets the finite-time extinction condition
/// (`*met` is 1 or 0).
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_extinction_criterion(p: *const PpParams, x1_0: f64, met: *mut i32) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        let v = extinction::extinction_ic_condition(x1_0, &p.0)?;
        write(met, i32::from(v.criterion_met), "met")
    })
}

/// Critical `a1` of the Hopf point, iterating from `a1_start` and the
/// equilibrium near `(x1, x2)`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn pp_hopf_critical_a1(p: *const PpParams, a1_start: f64, x1: f64, x2: f64, out: *mut f64) -> i32 {
    guard(|| {
        let p = deref(p, "params")?;
        let (a1, _) = bifurcation::hopf_critical_a1_resolved(&p.0, a1_start, State::new(x1, x2))?;
        write(out, a1, "out")
    })
}
