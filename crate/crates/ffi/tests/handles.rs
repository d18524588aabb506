use std::ffi::{CStr, CString};
use std::ptr;

use frac_cauchy_ffi::*;

fn matrix(n: usize, re: &[f64]) -> *mut FcMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fc_matrix_new(n, re.as_ptr(), ptr::null(), &mut m) }, FcStatus::Ok);
    m
}

fn last_error() -> String {
    let p = fc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_cargo_version() {
    let v = unsafe { CStr::from_ptr(fc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fc_matrix_new(1, ptr::null(), ptr::null(), &mut m) }, FcStatus::NullPointer);
    assert!(m.is_null());
    let mut mt = 0.0;
    assert_eq!(unsafe { fc_certify(ptr::null(), 0.0, &mut mt) }, FcStatus::NullPointer);
    assert_eq!(unsafe { fc_matrix_dim(ptr::null()) }, 0);
    unsafe {
        fc_matrix_free(ptr::null_mut());
        fc_evaluator_free(ptr::null_mut());
        fc_solution_free(ptr::null_mut());
    }
}

#[test]
fn scalar_mittag_leffler_through_handles() {
    let m = matrix(1, &[-1.0]);
    assert_eq!(unsafe { fc_matrix_dim(m) }, 1);
    let mut ev = ptr::null_mut();
    assert_eq!(unsafe { fc_evaluator_new(m, FcFamily::MittagLeffler, 0.5, &mut ev) }, FcStatus::Ok);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { fc_evaluator_eval(ev, 1.0, &mut re, &mut im) }, FcStatus::Ok);
    // E_{1/2}(-1) = e·erfc(1)
    assert!((re - 0.427_583_576_155_807).abs() < 1e-12, "{re}");
    assert!(im.abs() < 1e-12);
    unsafe {
        fc_evaluator_free(ev);
        fc_matrix_free(m);
    }
}

#[test]
fn semigroup_matches_exponential() {
    let m = matrix(2, &[-1.0, 0.0, 0.0, -3.0]);
    let mut ev = ptr::null_mut();
    assert_eq!(unsafe { fc_evaluator_new(m, FcFamily::Semigroup, 0.0, &mut ev) }, FcStatus::Ok);
    let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
    assert_eq!(unsafe { fc_evaluator_eval(ev, 0.5, re.as_mut_ptr(), im.as_mut_ptr()) }, FcStatus::Ok);
    let want = [(-0.5f64).exp(), 0.0, 0.0, (-1.5f64).exp()];
    for k in 0..4 {
        assert!((re[k] - want[k]).abs() < 1e-12, "{k}: {}", re[k]);
    }
    unsafe {
        fc_evaluator_free(ev);
        fc_matrix_free(m);
    }
}

#[test]
fn unstable_matrix_is_not_sectorial() {
    let m = matrix(1, &[1.0]);
    let mut mt = 0.0;
    assert_eq!(unsafe { fc_certify(m, 0.0, &mut mt) }, FcStatus::NotSectorial);
    assert!(last_error().contains("rejected"));
    let mut ev = ptr::null_mut();
    assert_eq!(unsafe { fc_evaluator_new(m, FcFamily::Semigroup, 1.0, &mut ev) }, FcStatus::NotSectorial);
    assert!(ev.is_null());
    unsafe { fc_matrix_free(m) };
}

#[test]
fn invalid_alpha_is_invalid_argument() {
    let m = matrix(1, &[-1.0]);
    let mut ev = ptr::null_mut();
    let s = unsafe { fc_evaluator_new(m, FcFamily::MittagLefflerAlpha, 1.5, &mut ev) };
    assert_ne!(s, FcStatus::Ok);
    assert!(ev.is_null());
    unsafe { fc_matrix_free(m) };
}

#[test]
fn linear_solve_and_blowup() {
    let m = matrix(1, &[-1.0]);
    let u0 = [1.0];
    let mut sol = ptr::null_mut();
    let s = unsafe {
        fc_solve(m, u0.as_ptr(), ptr::null(), 1.0, FcNonlinearity::Zero, 0.0, 0.0, 0.0, 1.0, 1.0 / 64.0, &mut sol)
    };
    assert_eq!(s, FcStatus::Ok);
    let n = unsafe { fc_solution_len(sol) };
    assert_eq!(n, 65);
    let (mut t, mut re, mut im) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { fc_solution_get(sol, n - 1, &mut t, &mut re, &mut im) }, FcStatus::Ok);
    assert_eq!(t, 1.0);
    assert!((re - (-1.0f64).exp()).abs() < 1e-9, "{re}");
    assert_eq!(unsafe { fc_solution_get(sol, n, &mut t, &mut re, &mut im) }, FcStatus::InvalidArgument);
    let mut status = FcSolveStatus::Blowup;
    assert_eq!(unsafe { fc_solution_status(sol, &mut status, ptr::null_mut()) }, FcStatus::Ok);
    assert_eq!(status, FcSolveStatus::Completed);
    unsafe { fc_solution_free(sol) };

    // u' = -u + u², u(0) = 2 blows up at ln 2.
    let u0 = [2.0];
    let mut sol = ptr::null_mut();
    let s = unsafe {
        fc_solve(m, u0.as_ptr(), ptr::null(), 1.0, FcNonlinearity::Quadratic, 1.0, 0.0, 0.0, 1.0, 1.0 / 256.0, &mut sol)
    };
    assert_eq!(s, FcStatus::Ok);
    let mut at = 0.0;
    assert_eq!(unsafe { fc_solution_status(sol, &mut status, &mut at) }, FcStatus::Ok);
    assert_eq!(status, FcSolveStatus::Blowup);
    assert!((at - 2f64.ln()).abs() < 5e-3, "{at}");
    unsafe {
        fc_solution_free(sol);
        fc_matrix_free(m);
    }
}

#[test]
fn run_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(r#"{"command":"eval","matrix":[[-2]],"family":"semigroup","times":[0,1]}"#).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut code = -1;
    assert_eq!(unsafe { fc_run_config(cfg.as_ptr(), out.as_ptr(), &mut code) }, FcStatus::Ok);
    assert_eq!(code, 0);
    let values = std::fs::read_to_string(dir.path().join("values.csv")).unwrap();
    assert_eq!(values.lines().count(), 3);
    assert!(dir.path().join("manifest.json").exists());

    let bad = CString::new(r#"{"command":"eval"}"#).unwrap();
    assert_eq!(unsafe { fc_run_config(bad.as_ptr(), out.as_ptr(), &mut code) }, FcStatus::ConfigError);
    assert!(last_error().contains(".matrix"));
}
