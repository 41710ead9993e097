use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use predprey_ffi::*;

fn base_set() -> *mut PpParams {
    let mut p = ptr::null_mut();
    let code = unsafe { pp_params_new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.8, 1.0, 1.0, &mut p) };
    assert_eq!(code, PP_OK);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pp_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn invalid_params_report_message() {
    let mut p = ptr::null_mut();
    let code = unsafe { pp_params_new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.0, 1.0, 1.0, &mut p) };
    assert_eq!(code, PP_INVALID_PARAMS);
    assert!(p.is_null());
    assert!(last_error().contains("m1 must lie in (0,1]"));
    let code = unsafe { pp_params_new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.8, 1.0, 1.0, ptr::null_mut()) };
    assert_eq!(code, PP_NULL_POINTER);
}

#[test]
fn rhs_and_capacity() {
    let p = base_set();
    let (mut dx1, mut dx2, mut k) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(pp_rhs(p, 0.0, 0.0, &mut dx1, &mut dx2), PP_OK);
        assert_eq!((dx1, dx2), (0.0, 0.0));
        assert_eq!(pp_params_carrying_capacity(p, &mut k), PP_OK);
        assert!((k - 0.6 / 0.063).abs() < 1e-15);
        assert_eq!(pp_rhs(p, k, 0.0, &mut dx1, &mut dx2), PP_OK);
        assert!(dx1.abs() < 1e-14 && dx2 == 0.0);
        assert_eq!(pp_rhs(p, -1.0, 0.0, &mut dx1, &mut dx2), PP_DOMAIN);
        assert!(!last_error().is_empty());
        assert_eq!(pp_rhs(ptr::null(), 1.0, 1.0, &mut dx1, &mut dx2), PP_NULL_POINTER);
        pp_params_free(p);
    }
}

#[test]
fn integrate_to_extinction() {
    let p = base_set();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(pp_integrate(p, 0.3, 50.0, 500.0, &mut t), PP_OK);
        let (mut kind, mut time, mut n) = (-1, 0.0, 0usize);
        assert_eq!(pp_trajectory_termination(t, &mut kind, &mut time), PP_OK);
        assert_eq!(kind, PP_TERM_PREY_EXTINCT);
        assert!(time > 0.1 && time < 0.2);
        assert_eq!(pp_trajectory_len(t, &mut n), PP_OK);
        let (mut s, mut x1, mut x2) = (0.0, 0.0, 0.0);
        assert_eq!(pp_trajectory_get(t, 0, &mut s, &mut x1, &mut x2), PP_OK);
        assert_eq!((s, x1, x2), (0.0, 0.3, 50.0));
        assert_eq!(pp_trajectory_get(t, n - 1, &mut s, &mut x1, &mut x2), PP_OK);
        assert_eq!(s, time);
        assert_eq!(pp_trajectory_get(t, n, &mut s, &mut x1, &mut x2), PP_OUT_OF_RANGE);
        pp_trajectory_free(t);
        pp_params_free(p);
    }
}

#[test]
fn equilibria_and_thresholds() {
    let p = base_set();
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(pp_interior_equilibria(p, &mut e), PP_OK);
        let mut n = 0usize;
        assert_eq!(pp_equilibria_len(e, &mut n), PP_OK);
        assert_eq!(n, 1);
        let (mut x1, mut x2, mut tr, mut det) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(pp_equilibria_get(e, 0, &mut x1, &mut x2, &mut tr, &mut det), PP_OK);
        assert!((x1 - 1.45094).abs() < 1e-4 && (x2 - 1.47587).abs() < 1e-4);
        assert!(tr > 0.0 && det > 0.0);
        pp_equilibria_free(e);

        let (mut k2, mut r) = (0.0, 0.0);
        assert_eq!(pp_dissipative_bound_k2(p, 0.01, &mut k2), PP_OK);
        assert!((k2 - 30.508).abs() < 1e-3);
        assert_eq!(pp_refuge_threshold(p, 0.3, k2, &mut r), PP_OK);
        assert!(r > 0.0 && r < 1.0);
        assert_eq!(pp_refuge_threshold(p, 20.0, k2, &mut r), PP_PRECONDITION);

        let mut met = -1;
        assert_eq!(pp_extinction_criterion(p, 0.3, &mut met), PP_OK);
        assert_eq!(met, 1);
        assert_eq!(pp_extinction_criterion(p, 0.5, &mut met), PP_OK);
        assert_eq!(met, 0);

        let mut a1 = 0.0;
        assert_eq!(pp_hopf_critical_a1(p, 0.3, 1.45, 0.5, &mut a1), PP_OK);
        assert!((a1 - 0.261835).abs() < 1e-4);
        pp_params_free(p);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        pp_params_free(ptr::null_mut());
        pp_trajectory_free(ptr::null_mut());
        pp_equilibria_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include").join("predprey.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["pp_params_new", "pp_integrate", "pp_refuge_threshold", "pp_last_error_message", "PP_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc").arg("--version").output() else { return };
    if !status.status.success() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"predprey.h\"\n\
         int main(void) {\n\
           PpParams *p = NULL;\n\
           double dx1, dx2;\n\
           if (pp_params_new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.8, 1.0, 1.0, &p) != PP_OK) return 1;\n\
           int rc = pp_rhs(p, 1.0, 1.0, &dx1, &dx2);\n\
           pp_params_free(p);\n\
           return rc == PP_OK ? 0 : (int)pp_last_error_message()[0];\n\
         }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
