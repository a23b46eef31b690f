use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use warpcheck_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = wc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn entry(id: &str, lambda: f64, big_a: f64) -> *mut WcCatalogEntry {
    let mut e = ptr::null_mut();
    assert_eq!(wc_catalog_entry_new(cs(id).as_ptr(), lambda, big_a, &mut e), WcStatus::Ok);
    e
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(wc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn metric_curvature_and_residuals() {
    unsafe {
        let mut m = ptr::null_mut();
        let lo = [0.5, 0.0];
        let hi = [5.0, 2.0 * std::f64::consts::PI];
        let s = wc_metric_new(
            cs("r").as_ptr(),
            cs("theta").as_ptr(),
            cs("1").as_ptr(),
            cs("r^10").as_ptr(),
            1,
            1,
            lo.as_ptr(),
            hi.as_ptr(),
            true,
            &mut m,
        );
        assert_eq!(s, WcStatus::Ok);
        assert!(wc_last_error().is_null());
        let mut k = 0.0;
        assert_eq!(wc_metric_gauss_curvature(m, 2.0, 0.3, &mut k), WcStatus::Ok);
        assert!((k + 5.0).abs() <= 1e-12);

        let mut r = [1.0; 3];
        let s = wc_case_residuals(m, cs("4/r^2").as_ptr(), cs("1a").as_ptr(), 0.0, 0.0, -2.0, 2.0, 0.3, r.as_mut_ptr());
        assert_eq!(s, WcStatus::Ok);
        assert!(r.iter().all(|v| v.abs() <= 1e-9), "{r:?}");

        let s = wc_case_residuals(m, cs("4/q").as_ptr(), cs("1a").as_ptr(), 0.0, 0.0, -2.0, 2.0, 0.3, r.as_mut_ptr());
        assert_eq!(s, WcStatus::InvalidArgument);
        assert!(last_error().contains('q'));
        let s = wc_case_residuals(m, cs("1").as_ptr(), cs("1a").as_ptr(), 0.0, 1.0, -2.0, 2.0, 0.3, r.as_mut_ptr());
        assert_eq!(s, WcStatus::InvalidArgument);
        wc_metric_free(m);
    }
}

#[test]
fn metric_errors() {
    unsafe {
        let mut m = ptr::null_mut();
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        let make = |e: &str, out: &mut *mut WcMetric| {
            wc_metric_new(cs("x").as_ptr(), cs("y").as_ptr(), cs(e).as_ptr(), cs("1").as_ptr(), 1, 1, lo.as_ptr(), hi.as_ptr(), false, out)
        };
        assert_eq!(make("2x", &mut m), WcStatus::InvalidArgument);
        assert!(m.is_null());
        assert_eq!(make("0", &mut m), WcStatus::Ok);
        let mut k = 0.0;
        assert_eq!(wc_metric_gauss_curvature(m, 0.5, 0.5, &mut k), WcStatus::Numeric);
        assert!(last_error().contains("degenerate"));
        wc_metric_free(m);

        assert_eq!(wc_metric_gauss_curvature(ptr::null(), 0.5, 0.5, &mut k), WcStatus::NullPointer);
        let bad = [0xffu8, 0];
        let s = wc_metric_new(bad.as_ptr().cast(), cs("y").as_ptr(), cs("1").as_ptr(), cs("1").as_ptr(), 1, 1, lo.as_ptr(), hi.as_ptr(), false, &mut m);
        assert_eq!(s, WcStatus::InvalidUtf8);
        wc_metric_free(ptr::null_mut());
    }
}

#[test]
fn catalog_entries() {
    unsafe {
        let e = entry("eq20", 2.0, 0.0);
        let (mut k, mut closed) = (0.0, 0.0);
        let mut m = ptr::null_mut();
        assert_eq!(wc_catalog_entry_metric(e, &mut m), WcStatus::Ok);
        assert_eq!(wc_metric_gauss_curvature(m, 1.7, 0.2, &mut k), WcStatus::Ok);
        assert_eq!(wc_catalog_entry_closed_k(e, 1.7, 0.2, &mut closed), WcStatus::Ok);
        assert!((k - closed).abs() <= 1e-6 * closed.abs());
        let mut w = WcWitness::default();
        assert_eq!(wc_catalog_entry_witness(e, 40, 16, 1e-6, &mut w), WcStatus::Ok);
        assert!(w.pass && w.points == 640 && w.min_abs_gap > 0.0);
        assert_eq!(wc_catalog_entry_witness(e, 5, 5, 1e-6, &mut w), WcStatus::InvalidArgument);
        wc_metric_free(m);
        wc_catalog_entry_free(e);

        let mut e = ptr::null_mut();
        assert_eq!(wc_catalog_entry_new(cs("eq99").as_ptr(), 0.0, 0.0, &mut e), WcStatus::InvalidArgument);
        assert!(last_error().contains("eq99"));
        assert_eq!(wc_catalog_entry_new(cs("case1b").as_ptr(), 0.0, 0.0, &mut e), WcStatus::InvalidArgument);
    }
}

#[test]
fn solve_and_constants() {
    unsafe {
        let e = entry("eq12", 0.0, 0.0);
        let mut u = 0.0;
        assert_eq!(wc_catalog_entry_u(e, 2.0, 0.0, &mut u), WcStatus::Ok);
        assert_eq!(u, 1.0);
        let mut s = WcSolveSummary::default();
        assert_eq!(wc_solve_entry(e, 1.0, 0.0, 1.0, 3.0, 32, 16, 1e-10, 50, &mut s), WcStatus::Ok);
        assert!(s.converged && s.iterations <= 8 && s.final_residual <= 1e-10);
        assert!(s.max_error < 1e-3, "{s:?}");
        assert_eq!(wc_solve_entry(e, 1.0, 0.0, 1.0, 3.0, 32, 16, 1e-10, 1, &mut s), WcStatus::NoConvergence);
        assert!(!s.converged && s.iterations == 1);
        assert_eq!(wc_solve_entry(e, 1.0, 0.0, 1.0, 3.0, 4, 4, 1e-10, 50, &mut s), WcStatus::InvalidArgument);
        // On the full annulus Newton finds another solution of the
        // discrete problem, far from u.
        assert_eq!(wc_solve_entry(e, 1.0, 0.0, 0.5, 5.0, 64, 32, 1e-10, 50, &mut s), WcStatus::Ok);
        assert!(s.converged && s.max_error > 1.0);
        assert_eq!(wc_solve_entry(e, 1.0, 0.0, 3.0, 1.0, 32, 16, 1e-10, 50, &mut s), WcStatus::InvalidArgument);
        wc_catalog_entry_free(e);

        let (mut p, mut m) = (0.0, 0.0);
        assert_eq!(wc_case2b_constant_f(8.0, 1.0, &mut p, &mut m), WcStatus::Ok);
        assert!((p - 11.0 - 57f64.sqrt()).abs() <= 1e-12);
        assert!((m - 11.0 + 57f64.sqrt()).abs() <= 1e-12);
        assert_eq!(wc_case2b_constant_f(8.0, 0.0, &mut p, &mut m), WcStatus::InvalidArgument);
        assert_eq!(wc_case2b_constant_f(8.0, 1.0, ptr::null_mut(), &mut m), WcStatus::NullPointer);
    }
}

#[test]
fn header_is_generated_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/warpcheck.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["WC_STATUS_NO_CONVERGENCE", "typedef struct WcMetric WcMetric", "wc_solve_entry", "wc_last_error"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipping header compile");
        return;
    };
    assert!(status.success());
}
