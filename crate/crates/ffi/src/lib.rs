//! C ABI for the retrial-queue solver.
//!
//! Handles are opaque; every function returns a status code and writes
//! results through out-pointers. A solution owns a copy of the parameters it
//! was computed from, so it stays valid after the parameter handle is freed.

// Entry points are deliberately safe fns per the C calling convention:
// every pointer is null-checked before use, and validity of non-null
// pointers is the caller's contract as documented per function.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::panic::{catch_unwind, AssertUnwindSafe};

use retrial_qbd::rate_matrix::{algorithm1, IterationSchedule};
use retrial_qbd::stationary::{self, StationaryDist};
use retrial_qbd::{metrics, Error, ModelParams};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RqbdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Unstable = 3,
    NoConvergence = 4,
    TruncationOverflow = 5,
    NumericalError = 6,
    OutOfRange = 7,
    Panic = 8,
}

fn status_for(err: &Error) -> RqbdStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::WrongServerCount(_)
        | Error::SizeBudgetExceeded { .. } => RqbdStatus::InvalidParameter,
        Error::Unstable(_) => RqbdStatus::Unstable,
        Error::NoConvergence { .. } => RqbdStatus::NoConvergence,
        Error::TruncationOverflow { .. } => RqbdStatus::TruncationOverflow,
        Error::NumericalBreakdown(_)
        | Error::BoundaryResidualTooLarge { .. }
        | Error::SingularSystem => RqbdStatus::NumericalError,
    }
}

/// Opaque parameter handle.
pub struct RqbdParams {
    inner: ModelParams,
}

/// Opaque solution handle: truncated stationary distribution plus the
/// parameters it was solved for.
pub struct RqbdSolution {
    params: ModelParams,
    dist: StationaryDist,
}

/// Flat performance summary; mirrors the library's report.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RqbdReport {
    pub rho: f64,
    pub n_trunc: usize,
    pub blocking_low: f64,
    pub blocking_high: f64,
    pub mean_busy: f64,
    pub little_error: f64,
    pub tail_exponent: f64,
    pub boundary_residual: f64,
    /// 1 when the boundary vector came from the dense fallback solve.
    pub boundary_fallback: i32,
}

fn guarded<F: FnOnce() -> RqbdStatus>(f: F) -> RqbdStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(RqbdStatus::Panic)
}

/// Creates a parameter handle from explicit rates. On success writes the
/// handle to `out` and returns Ok; `out` is untouched otherwise.
#[no_mangle]
pub extern "C" fn rqbd_params_new(
    c: usize,
    lambda1: f64,
    lambda2: f64,
    mu: f64,
    nu: f64,
    out: *mut *mut RqbdParams,
) -> RqbdStatus {
    if out.is_null() {
        return RqbdStatus::NullPointer;
    }
    guarded(|| match ModelParams::new(c, lambda1, lambda2, mu, nu) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(RqbdParams { inner })) };
            RqbdStatus::Ok
        }
        Err(e) => status_for(&e),
    })
}

/// Creates a parameter handle from traffic intensity rho = lambda/(c nu) and
/// the split ratio lambda2/lambda1.
#[no_mangle]
pub extern "C" fn rqbd_params_from_rho(
    c: usize,
    rho: f64,
    ratio21: f64,
    mu: f64,
    nu: f64,
    out: *mut *mut RqbdParams,
) -> RqbdStatus {
    if out.is_null() {
        return RqbdStatus::NullPointer;
    }
    guarded(|| match ModelParams::from_rho(c, rho, ratio21, mu, nu) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(RqbdParams { inner })) };
            RqbdStatus::Ok
        }
        Err(e) => status_for(&e),
    })
}

/// Frees a parameter handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn rqbd_params_free(params: *mut RqbdParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

/// Solves for the stationary distribution. `n_max` = 0 selects the
/// truncation point automatically from `eps_trunc`.
#[no_mangle]
pub extern "C" fn rqbd_solve(
    params: *const RqbdParams,
    eps_rate: f64,
    eps_trunc: f64,
    n_max: usize,
    out: *mut *mut RqbdSolution,
) -> RqbdStatus {
    if params.is_null() || out.is_null() {
        return RqbdStatus::NullPointer;
    }
    guarded(|| {
        let p = unsafe { &(*params).inner };
        if !eps_rate.is_finite() || eps_rate <= 0.0 {
            return RqbdStatus::InvalidParameter;
        }
        let schedule = IterationSchedule::doubling(eps_rate, 40);
        let result = if n_max == 0 {
            stationary::algorithm2(p, eps_trunc, &schedule)
        } else {
            stationary::solve_truncated(p, n_max, &schedule)
        };
        match result {
            Ok(dist) => {
                let sol = RqbdSolution { params: *p, dist };
                unsafe { *out = Box::into_raw(Box::new(sol)) };
                RqbdStatus::Ok
            }
            Err(e) => status_for(&e),
        }
    })
}

/// Frees a solution handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn rqbd_solution_free(solution: *mut RqbdSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Truncation point N of a solution.
#[no_mangle]
pub extern "C" fn rqbd_solution_n_trunc(
    solution: *const RqbdSolution,
    out: *mut usize,
) -> RqbdStatus {
    if solution.is_null() || out.is_null() {
        return RqbdStatus::NullPointer;
    }
    unsafe { *out = (*solution).dist.n_trunc };
    RqbdStatus::Ok
}

/// Stationary probability of orbit size n with i channels busy.
#[no_mangle]
pub extern "C" fn rqbd_solution_prob(
    solution: *const RqbdSolution,
    n: usize,
    i: usize,
    out: *mut f64,
) -> RqbdStatus {
    if solution.is_null() || out.is_null() {
        return RqbdStatus::NullPointer;
    }
    let sol = unsafe { &*solution };
    if n > sol.dist.n_trunc || i > sol.params.c {
        return RqbdStatus::OutOfRange;
    }
    unsafe { *out = sol.dist.pi(n, i) };
    RqbdStatus::Ok
}

/// Fills the performance summary for a solution.
#[no_mangle]
pub extern "C" fn rqbd_solution_report(
    solution: *const RqbdSolution,
    out: *mut RqbdReport,
) -> RqbdStatus {
    if solution.is_null() || out.is_null() {
        return RqbdStatus::NullPointer;
    }
    guarded(|| {
        let sol = unsafe { &*solution };
        let r = metrics::report(&sol.params, &sol.dist);
        unsafe {
            *out = RqbdReport {
                rho: r.rho,
                n_trunc: r.n_trunc,
                blocking_low: r.blocking_low,
                blocking_high: r.blocking_high,
                mean_busy: r.mean_busy,
                little_error: r.little_error,
                tail_exponent: r.tail_exponent,
                boundary_residual: r.boundary_residual,
                boundary_fallback: r.boundary_fallback as i32,
            };
        }
        RqbdStatus::Ok
    })
}

/// Writes the two nonzero rows of the converged rate matrix at level n into
/// caller-provided buffers of length c + 1 each.
#[no_mangle]
pub extern "C" fn rqbd_rate_rows(
    params: *const RqbdParams,
    n: usize,
    eps_rate: f64,
    row_blocked: *mut f64,
    row_full: *mut f64,
    len: usize,
) -> RqbdStatus {
    if params.is_null() || row_blocked.is_null() || row_full.is_null() {
        return RqbdStatus::NullPointer;
    }
    guarded(|| {
        let p = unsafe { &(*params).inner };
        if n < 1 || !eps_rate.is_finite() || eps_rate <= 0.0 {
            return RqbdStatus::InvalidParameter;
        }
        if len != p.c + 1 {
            return RqbdStatus::OutOfRange;
        }
        let schedule = IterationSchedule::doubling(eps_rate, 40);
        match algorithm1(p, n, &schedule) {
            Ok(rows) => {
                unsafe {
                    std::ptr::copy_nonoverlapping(rows.r0.as_ptr(), row_blocked, len);
                    std::ptr::copy_nonoverlapping(rows.r1.as_ptr(), row_full, len);
                }
                RqbdStatus::Ok
            }
            Err(e) => status_for(&e),
        }
    })
}
