use std::ffi::{CStr, CString};
use std::ptr;

use drsplit_ffi::*;

fn last_error() -> String {
    let p = drs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const AFFINE: &str = r#"{"shape":[1],"operators":[
    {"kind":"affine","matrix":[[1.0]],"offset":[-3.0]},
    {"kind":"affine","matrix":[[1.0]]},
    {"kind":"affine","matrix":[[2.0]]}]}"#;

#[test]
fn plan_two_operator_example() {
    let sigmas = [-1.0, 2.0];
    let mut plan = ptr::null_mut();
    let st = unsafe { drs_plan_new(sigmas.as_ptr(), ptr::null(), 2, 1.0, &mut plan) };
    assert_eq!(st, DrsStatus::Ok);
    unsafe {
        assert!((drs_plan_lambda_bar(plan) - 0.25).abs() < 1e-9);
        assert_eq!(drs_plan_case(plan), DrsCase::NonmonotoneA);
        let n = drs_plan_delta(plan, ptr::null_mut(), 0);
        let mut buf = vec![0.0; n];
        assert_eq!(drs_plan_delta(plan, buf.as_mut_ptr(), n), n);
        assert!(buf.iter().all(|d| d.is_finite()));
        drs_plan_free(plan);
    }
}

#[test]
fn monotone_plan_is_unbounded() {
    let sigmas = [0.0, 1.0, 0.5];
    let weights = [0.5, 0.5];
    let mut plan = ptr::null_mut();
    let st = unsafe { drs_plan_new(sigmas.as_ptr(), weights.as_ptr(), 3, 1.0, &mut plan) };
    assert_eq!(st, DrsStatus::Ok, "{}", if st == DrsStatus::Ok { String::new() } else { last_error() });
    unsafe {
        assert_eq!(drs_plan_case(plan), DrsCase::MonotoneB);
        assert!(drs_plan_lambda_bar(plan).is_infinite());
        assert_eq!(drs_plan_delta(plan, ptr::null_mut(), 0), 0);
        drs_plan_free(plan);
    }
}

#[test]
fn unsupported_and_invalid_inputs() {
    let sigmas = [-1.0, 0.5];
    let mut plan = ptr::null_mut();
    let st = unsafe { drs_plan_new(sigmas.as_ptr(), ptr::null(), 2, 1.0, &mut plan) };
    assert_eq!(st, DrsStatus::Unsupported);
    assert!(plan.is_null());
    assert!(!last_error().is_empty());

    let st = unsafe { drs_plan_new(sigmas.as_ptr(), ptr::null(), 2, 3.0, &mut plan) };
    assert_eq!(st, DrsStatus::InvalidArgument);

    let st = unsafe { drs_plan_new(ptr::null(), ptr::null(), 2, 1.0, &mut plan) };
    assert_eq!(st, DrsStatus::NullPointer);
    assert!(last_error().contains("sigmas"));

    let st = unsafe { drs_plan_new(sigmas.as_ptr(), ptr::null(), 2, 1.0, ptr::null_mut()) };
    assert_eq!(st, DrsStatus::NullPointer);
}

#[test]
fn success_clears_last_error() {
    let mut out = 0.0;
    let st = unsafe { drs_prox_phi_scalar(1.0, 2.0, 0.9, &mut out) };
    assert_eq!(st, DrsStatus::InvalidArgument);
    assert!(!drs_last_error().is_null());
    let st = unsafe { drs_prox_phi_scalar(2.0, 0.0, 0.5, &mut out) };
    assert_eq!(st, DrsStatus::Ok);
    assert!(drs_last_error().is_null());
    assert_eq!(out, 1.5);
}

#[test]
fn prox_is_stationary() {
    let (t, omega, kappa) = (3.0, 0.8, 0.7);
    let mut w = 0.0;
    assert_eq!(unsafe { drs_prox_phi_scalar(t, omega, kappa, &mut w) }, DrsStatus::Ok);
    let d = 1.0 + 0.5 * omega * w;
    assert!((w - t + kappa / (d * d)).abs() < 1e-12);
}

#[test]
fn naive_stepsize_matches_planner_on_two_operators() {
    let sigmas = [-1.0, 2.0];
    let mut out = 0.0;
    assert_eq!(unsafe { drs_naive_stepsize(sigmas.as_ptr(), 2, 1.0, &mut out) }, DrsStatus::Ok);
    assert!(out > 0.0 && out <= 0.25 + 1e-12);
}

#[test]
fn solve_affine_problem() {
    let json = CString::new(AFFINE).unwrap();
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { drs_problem_from_json(json.as_ptr(), &mut prob) }, DrsStatus::Ok);
    assert_eq!(unsafe { drs_problem_operator_count(prob) }, 2);
    for variant in [DrsVariant::Fg, DrsVariant::Gf] {
        let mut opts = drs_solve_options_default();
        opts.tol = 1e-20;
        opts.variant = variant;
        let mut run = ptr::null_mut();
        assert_eq!(unsafe { drs_solve(prob, &opts, &mut run) }, DrsStatus::Ok);
        unsafe {
            assert!(drs_run_converged(run));
            assert!(drs_run_iterations(run) > 0);
            assert!(drs_run_residual(run) < 1e-20);
            assert_eq!(drs_run_lambda(run), 1.0);
            let mut shadow = [0.0; 4];
            assert_eq!(drs_run_shadow(run, shadow.as_mut_ptr(), shadow.len()), 1);
            assert!((shadow[0] - 0.75).abs() < 1e-9, "{variant:?}: {}", shadow[0]);
            let csv = drs_run_log_csv(run);
            assert!(!csv.is_null());
            let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
            assert!(text.starts_with("k,"));
            drs_string_free(csv);
            drs_run_free(run);
        }
    }
    unsafe { drs_problem_free(prob) };
}

#[test]
fn max_iter_is_reported_not_failed() {
    let json = CString::new(AFFINE).unwrap();
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { drs_problem_from_json(json.as_ptr(), &mut prob) }, DrsStatus::Ok);
    let mut opts = drs_solve_options_default();
    opts.max_iter = 1;
    opts.tol = 0.0;
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { drs_solve(prob, &opts, &mut run) }, DrsStatus::Ok);
    unsafe {
        assert!(!drs_run_converged(run));
        assert_eq!(drs_run_iterations(run), 1);
        drs_run_free(run);
        drs_problem_free(prob);
    }
}

#[test]
fn bad_json_is_invalid() {
    let json = CString::new(r#"{"shape":[1],"operators":[{"kind":"bogus"}]}"#).unwrap();
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { drs_problem_from_json(json.as_ptr(), &mut prob) }, DrsStatus::InvalidArgument);
    assert!(prob.is_null());
    assert!(last_error().contains("json"));
    assert_eq!(unsafe { drs_problem_from_json(ptr::null(), &mut prob) }, DrsStatus::NullPointer);
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        drs_plan_free(ptr::null_mut());
        drs_problem_free(ptr::null_mut());
        drs_run_free(ptr::null_mut());
        drs_string_free(ptr::null_mut());
        assert!(drs_plan_lambda_bar(ptr::null()).is_nan());
        assert_eq!(drs_run_iterations(ptr::null()), 0);
        assert_eq!(drs_solve(ptr::null(), ptr::null(), &mut ptr::null_mut()), DrsStatus::NullPointer);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/drsplit.h")).unwrap();
    for name in [
        "drs_last_error",
        "drs_plan_new",
        "drs_plan_lambda_bar",
        "drs_plan_free",
        "drs_naive_stepsize",
        "drs_prox_phi_scalar",
        "drs_problem_from_json",
        "drs_solve",
        "drs_run_shadow",
        "drs_run_log_csv",
        "drs_string_free",
        "typedef struct DrsRun DrsRun",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
