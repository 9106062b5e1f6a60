use std::ffi::CStr;
use std::ptr;

use splitsolve_ffi::*;

fn last_error() -> String {
    let p = ss_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cole_hopf() -> *mut SsProblem {
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { ss_problem_cole_hopf(5.0, 1.0, &mut prob) }, SsStatus::Ok);
    assert!(!prob.is_null());
    prob
}

#[test]
fn solve_and_read_back() {
    let prob = cole_hopf();
    let mut sol = ptr::null_mut();
    let status = unsafe { ss_solve(prob, -6.0, 11.0, 0.05, 0.25, &mut sol) };
    assert_eq!(status, SsStatus::Ok);
    unsafe {
        assert_eq!(ss_solution_num_layers(sol), 5);
        assert_eq!(ss_solution_num_nodes(sol), 341);

        let mut value = f64::NAN;
        assert_eq!(ss_solution_evaluate(sol, 0.0, 5.0, &mut value), SsStatus::Ok);
        let mut exact = f64::NAN;
        assert_eq!(ss_cole_hopf_exact(5.0, 1.0, 0.0, 5.0, &mut exact), SsStatus::Ok);
        assert!((exact - 4.364941092414899).abs() < 1e-9);
        assert!((value - exact).abs() < 0.05, "{value} vs {exact}");

        let mut terminal = vec![0.0; 341];
        assert_eq!(
            ss_solution_layer(sol, 4, terminal.as_mut_ptr(), terminal.len()),
            SsStatus::Ok
        );
        assert_eq!(terminal[0], 0.0);
        assert_eq!(terminal[340], 5.0);
        assert!((terminal[140] - 1.0).abs() < 1e-12);

        ss_solution_free(sol);
        ss_problem_free(prob);
    }
}

#[test]
fn howard_handle_matches_layer_count() {
    let prob = cole_hopf();
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(
            ss_howard_solve(prob, -6.0, 11.0, 0.05, 0.125, &mut sol),
            SsStatus::Ok
        );
        assert_eq!(ss_solution_num_layers(sol), 9);
        let mut v = f64::NAN;
        assert_eq!(ss_solution_evaluate(sol, 0.0, 5.0, &mut v), SsStatus::Ok);
        assert!((v - 4.3649).abs() < 0.05, "{v}");
        ss_solution_free(sol);
        ss_problem_free(prob);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let prob = cole_hopf();
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(
            ss_solve(prob, -6.0, 11.0, 0.05, 0.3, &mut sol),
            SsStatus::StepMismatch
        );
        assert!(sol.is_null());
        assert!(last_error().contains("does not divide"), "{}", last_error());

        assert_eq!(
            ss_solve(prob, 1.0, 0.0, 0.05, 0.25, &mut sol),
            SsStatus::InvalidGrid
        );
        assert_eq!(
            ss_solve(ptr::null(), -1.0, 1.0, 0.1, 0.25, &mut sol),
            SsStatus::NullPointer
        );
        assert_eq!(last_error(), "problem is null");
        assert_eq!(
            ss_solve(prob, -1.0, 1.0, 0.1, 0.25, ptr::null_mut()),
            SsStatus::NullPointer
        );

        let mut v = 0.0;
        assert_eq!(
            ss_cole_hopf_exact(5.0, 1.0, 1.0, 0.0, &mut v),
            SsStatus::OutOfRange
        );
        assert_eq!(
            ss_problem_cole_hopf(5.0, -1.0, &mut ptr::null_mut()),
            SsStatus::InvalidArgument
        );
        ss_problem_free(prob);
    }
}

#[test]
fn layer_copy_checks_bounds() {
    let prob = cole_hopf();
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(ss_solve(prob, -2.0, 2.0, 0.1, 0.5, &mut sol), SsStatus::Ok);
        let mut buf = vec![0.0; 41];
        assert_eq!(
            ss_solution_layer(sol, 3, buf.as_mut_ptr(), 41),
            SsStatus::OutOfRange
        );
        assert_eq!(
            ss_solution_layer(sol, 0, buf.as_mut_ptr(), 40),
            SsStatus::InvalidArgument
        );
        assert_eq!(
            ss_solution_layer(sol, 0, ptr::null_mut(), 41),
            SsStatus::NullPointer
        );
        assert_eq!(ss_solution_num_layers(ptr::null()), 0);
        assert!(ss_problem_horizon(ptr::null()).is_nan());
        assert_eq!(ss_problem_horizon(prob), 1.0);
        ss_solution_free(sol);
        ss_solution_free(ptr::null_mut());
        ss_problem_free(prob);
        ss_problem_free(ptr::null_mut());
    }
}

#[test]
fn problem_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.cfg");
    std::fs::write(&path, "[problem]\nname = \"quartic\"\nK = 3\nT = 0.5\n").unwrap();
    let c_path = std::ffi::CString::new(path.to_str().unwrap()).unwrap();
    let mut prob = ptr::null_mut();
    unsafe {
        assert_eq!(ss_problem_from_config(c_path.as_ptr(), &mut prob), SsStatus::Ok);
        assert_eq!(ss_problem_horizon(prob), 0.5);
        ss_problem_free(prob);

        let missing = c"/nonexistent/p.cfg";
        assert_eq!(ss_problem_from_config(missing.as_ptr(), &mut prob), SsStatus::Io);
        std::fs::write(&path, "[problem]\nname = \"heat\"\n").unwrap();
        assert_eq!(
            ss_problem_from_config(c_path.as_ptr(), &mut prob),
            SsStatus::Config
        );
        assert!(last_error().contains("[problem] name"));
    }
}

#[test]
fn normal_cdf_and_status_names() {
    assert_eq!(ss_normal_cdf(0.0), 0.5);
    assert!((ss_normal_cdf(1.96) - 0.9750021048517795).abs() < 1e-15);
    let name = unsafe { CStr::from_ptr(ss_status_name(SsStatus::CflViolation)) };
    assert_eq!(name.to_str().unwrap(), "CFL violation");
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/splitsolve.h");
    for name in [
        "ss_last_error_message",
        "ss_status_name",
        "ss_problem_cole_hopf",
        "ss_problem_quadratic_drift",
        "ss_problem_quartic",
        "ss_problem_from_config",
        "ss_problem_horizon",
        "ss_problem_free",
        "ss_solve",
        "ss_howard_solve",
        "ss_solution_evaluate",
        "ss_solution_num_layers",
        "ss_solution_num_nodes",
        "ss_solution_layer",
        "ss_solution_free",
        "ss_cole_hopf_exact",
        "ss_normal_cdf",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct SsProblem SsProblem;"));
    assert!(header.contains("SS_STATUS_STEP_MISMATCH = 7"));
}
