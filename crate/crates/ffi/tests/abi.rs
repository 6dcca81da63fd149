//! Exercises the C ABI through the exported symbols: handle lifecycle,
//! solving, the flat report, raw rate rows and the error paths.

use std::ptr;

use retrial_qbd_ffi::{
    rqbd_params_free, rqbd_params_from_rho, rqbd_params_new, rqbd_rate_rows, rqbd_solution_free,
    rqbd_solution_n_trunc, rqbd_solution_prob, rqbd_solution_report, rqbd_solve, RqbdParams,
    RqbdReport, RqbdSolution, RqbdStatus,
};

fn make_params() -> *mut RqbdParams {
    let mut p: *mut RqbdParams = ptr::null_mut();
    let status = rqbd_params_from_rho(5, 0.5, 4.0, 1.0, 1.0, &mut p);
    assert_eq!(status, RqbdStatus::Ok);
    assert!(!p.is_null());
    p
}

fn solve(p: *const RqbdParams) -> *mut RqbdSolution {
    let mut s: *mut RqbdSolution = ptr::null_mut();
    let status = rqbd_solve(p, 1e-13, 1e-10, 0, &mut s);
    assert_eq!(status, RqbdStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn full_lifecycle_solve_and_report() {
    let p = make_params();
    let s = solve(p);
    // the solution owns a copy of the parameters: freeing them first is fine
    rqbd_params_free(p);

    let mut n_trunc = 0usize;
    assert_eq!(rqbd_solution_n_trunc(s, &mut n_trunc), RqbdStatus::Ok);
    assert!(n_trunc >= 1);

    let mut total = 0.0f64;
    for n in 0..=n_trunc {
        for i in 0..=5usize {
            let mut v = 0.0f64;
            assert_eq!(rqbd_solution_prob(s, n, i, &mut v), RqbdStatus::Ok);
            assert!(v >= 0.0);
            total += v;
        }
    }
    assert!((total - 1.0).abs() < 1e-12);

    let mut report = RqbdReport {
        rho: 0.0,
        n_trunc: 0,
        blocking_low: 0.0,
        blocking_high: 0.0,
        mean_busy: 0.0,
        little_error: 0.0,
        tail_exponent: 0.0,
        boundary_residual: 0.0,
        boundary_fallback: 0,
    };
    assert_eq!(rqbd_solution_report(s, &mut report), RqbdStatus::Ok);
    assert!((report.rho - 0.5).abs() < 1e-12);
    assert_eq!(report.n_trunc, n_trunc);
    assert!(report.blocking_high <= report.blocking_low);
    assert!(report.little_error < 1e-6);

    rqbd_solution_free(s);
}

#[test]
fn explicit_rates_and_fixed_truncation() {
    let mut p: *mut RqbdParams = ptr::null_mut();
    assert_eq!(
        rqbd_params_new(5, 0.5, 2.0, 1.0, 1.0, &mut p),
        RqbdStatus::Ok
    );
    let mut s: *mut RqbdSolution = ptr::null_mut();
    assert_eq!(rqbd_solve(p, 1e-13, 1e-10, 60, &mut s), RqbdStatus::Ok);
    let mut n_trunc = 0usize;
    assert_eq!(rqbd_solution_n_trunc(s, &mut n_trunc), RqbdStatus::Ok);
    assert_eq!(n_trunc, 60);
    rqbd_solution_free(s);
    rqbd_params_free(p);
}

#[test]
fn rate_rows_roundtrip() {
    let p = make_params();
    let len = 6usize;
    let mut row_blocked = vec![0.0f64; len];
    let mut row_full = vec![0.0f64; len];
    let status = rqbd_rate_rows(
        p,
        100,
        1e-13,
        row_blocked.as_mut_ptr(),
        row_full.as_mut_ptr(),
        len,
    );
    assert_eq!(status, RqbdStatus::Ok);
    // row-sum identities: lambda2/(n mu) and lambda/(n mu) over the first c
    let (l1, l2) = (0.5, 2.0); // rho=0.5, c=5, nu=1, ratio 4 -> lambda=2.5
    let s0: f64 = row_blocked[..5].iter().sum();
    let s1: f64 = row_full[..5].iter().sum();
    assert!((s0 - l2 / 100.0).abs() < 1e-12);
    assert!((s1 - (l1 + l2) / 100.0).abs() < 1e-12);

    // wrong buffer length is rejected before anything is written
    let status = rqbd_rate_rows(
        p,
        100,
        1e-13,
        row_blocked.as_mut_ptr(),
        row_full.as_mut_ptr(),
        len - 1,
    );
    assert_eq!(status, RqbdStatus::OutOfRange);
    rqbd_params_free(p);
}

#[test]
fn error_paths_map_to_status_codes() {
    // null out-pointer
    assert_eq!(
        rqbd_params_from_rho(5, 0.5, 4.0, 1.0, 1.0, ptr::null_mut()),
        RqbdStatus::NullPointer
    );
    // invalid parameters (one server)
    let mut p: *mut RqbdParams = ptr::null_mut();
    assert_eq!(
        rqbd_params_new(1, 1.0, 1.0, 1.0, 1.0, &mut p),
        RqbdStatus::InvalidParameter
    );
    assert!(p.is_null(), "out-pointer must be untouched on failure");
    // unstable load
    assert_eq!(rqbd_params_from_rho(5, 1.5, 4.0, 1.0, 1.0, &mut p), RqbdStatus::Ok);
    let mut s: *mut RqbdSolution = ptr::null_mut();
    assert_eq!(rqbd_solve(p, 1e-13, 1e-10, 0, &mut s), RqbdStatus::Unstable);
    assert!(s.is_null());
    // bad tolerance
    assert_eq!(rqbd_solve(p, -1.0, 1e-10, 0, &mut s), RqbdStatus::InvalidParameter);
    rqbd_params_free(p);
    // null solution handles
    let mut v = 0.0f64;
    assert_eq!(
        rqbd_solution_prob(ptr::null(), 0, 0, &mut v),
        RqbdStatus::NullPointer
    );
    let mut n = 0usize;
    assert_eq!(rqbd_solution_n_trunc(ptr::null(), &mut n), RqbdStatus::NullPointer);
    // freeing null is a no-op
    rqbd_params_free(ptr::null_mut());
    rqbd_solution_free(ptr::null_mut());
}

#[test]
fn out_of_range_queries_are_rejected() {
    let p = make_params();
    let s = solve(p);
    let mut n_trunc = 0usize;
    rqbd_solution_n_trunc(s, &mut n_trunc);
    let mut v = 0.0f64;
    assert_eq!(
        rqbd_solution_prob(s, n_trunc + 1, 0, &mut v),
        RqbdStatus::OutOfRange
    );
    assert_eq!(rqbd_solution_prob(s, 0, 6, &mut v), RqbdStatus::OutOfRange);
    rqbd_solution_free(s);
    rqbd_params_free(p);
}

#[test]
fn generated_header_covers_the_abi() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/retrial_qbd.h"
    ))
    .expect("cbindgen header is generated at build time");
    for symbol in [
        "rqbd_params_new",
        "rqbd_params_from_rho",
        "rqbd_params_free",
        "rqbd_solve",
        "rqbd_solution_free",
        "rqbd_solution_n_trunc",
        "rqbd_solution_prob",
        "rqbd_solution_report",
        "rqbd_rate_rows",
        "RqbdStatus",
        "RqbdReport",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
