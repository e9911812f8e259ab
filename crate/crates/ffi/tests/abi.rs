use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use recurlab_ffi::*;

fn last_error() -> String {
    let p = rl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn golden() -> *mut RlSystem {
    let alpha = [0.6180339887498949_f64];
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { rl_system_rotation(alpha.as_ptr(), 1, &mut sys) }, RlStatus::Ok);
    sys
}

#[test]
fn rotation_iterates_and_scores() {
    let sys = golden();
    unsafe {
        assert_eq!(rl_system_dim(sys), 1);
        let x = [0.25];
        let mut y = [0.0];
        assert_eq!(rl_iterate(sys, x.as_ptr(), 1, 3, y.as_mut_ptr()), RlStatus::Ok);
        let want = (0.25 + 3.0 * 0.6180339887498949_f64).rem_euclid(1.0);
        assert!((y[0] - want).abs() < 1e-12);

        let mut score = f64::NAN;
        assert_eq!(rl_recurrence_score(sys, x.as_ptr(), 1, 1.0, 1, 1000, &mut score), RlStatus::Ok);
        assert!((score - 0.381966).abs() < 1e-5, "{score}");

        let mut hit = f64::NAN;
        assert_eq!(rl_hitting_score(sys, x.as_ptr(), x.as_ptr(), 1, 1.0, 1, 1000, &mut hit), RlStatus::Ok);
        assert_eq!(hit.to_bits(), score.to_bits());
        rl_system_free(sys);
    }
}

#[test]
fn towerize_round_trip_through_a_file() {
    let sys = golden();
    unsafe {
        let mut tau = ptr::null_mut();
        assert_eq!(rl_discretize(sys, 10, &mut tau), RlStatus::Ok);
        assert_eq!(rl_permutation_len(tau), 1024);

        let mut g = ptr::null_mut();
        let mut disp = f64::NAN;
        assert_eq!(rl_towerize(tau, 1.0 / 32.0, 0.1, &mut g, &mut disp), RlStatus::Ok);
        assert!(disp < 1.0 / 32.0);
        let mut frac = 0.0;
        assert_eq!(rl_period_fraction(g, 64, &mut frac), RlStatus::Ok);
        assert!(frac >= 0.9);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("g.gprm").to_str().unwrap()).unwrap();
        assert_eq!(rl_permutation_save(g, path.as_ptr()), RlStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(rl_permutation_load(path.as_ptr(), &mut back), RlStatus::Ok);
        let mut a = vec![0u32; 1024];
        let mut b = vec![0u32; 1024];
        assert_eq!(rl_permutation_forward(g, a.as_mut_ptr(), 1024), RlStatus::Ok);
        assert_eq!(rl_permutation_forward(back, b.as_mut_ptr(), 1024), RlStatus::Ok);
        assert_eq!(a, b);

        let mut as_map = ptr::null_mut();
        assert_eq!(rl_system_from_permutation(back, &mut as_map), RlStatus::Ok);
        assert_eq!(rl_system_dim(as_map), 1);

        rl_system_free(as_map);
        rl_permutation_free(back);
        rl_permutation_free(g);
        rl_permutation_free(tau);
        rl_system_free(sys);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(rl_system_rotation(ptr::null(), 1, &mut sys), RlStatus::NullPointer);
        assert!(last_error().contains("alpha"));

        let bad = [2i64, 0, 0, 1];
        assert_eq!(rl_system_automorphism(bad.as_ptr(), 2, &mut sys), RlStatus::InvalidArgument);
        assert!(last_error().contains("determinant"));

        let cat = {
            let mut c = ptr::null_mut();
            assert_eq!(rl_system_cat(&mut c), RlStatus::Ok);
            c
        };
        let x = [0.1];
        let mut out = [0.0; 2];
        assert_eq!(rl_iterate(cat, x.as_ptr(), 1, 1, out.as_mut_ptr()), RlStatus::SpaceMismatch);

        let mut tau = ptr::null_mut();
        assert_eq!(rl_discretize(cat, 5, &mut tau), RlStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(rl_towerize(tau, 1.0 / 64.0, 0.1, &mut g, ptr::null_mut()), RlStatus::Infeasible);
        assert!(last_error().contains("too small"));
        assert!(g.is_null());

        let missing = CString::new("/nonexistent/dir/p.gprm").unwrap();
        assert_eq!(rl_permutation_load(missing.as_ptr(), &mut g), RlStatus::Io);

        let mut short = [0u32; 3];
        assert_eq!(rl_permutation_forward(tau, short.as_mut_ptr(), 3), RlStatus::InvalidArgument);

        assert_eq!(rl_system_dim(ptr::null()), 0);
        rl_system_free(ptr::null_mut());
        rl_permutation_free(tau);
        rl_system_free(cat);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/recurlab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["rl_towerize", "rl_last_error_message", "RL_STATUS_INFEASIBLE", "typedef struct RlSystem RlSystem"] {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"recurlab.h\"\nint main(void) { return rl_last_error_message() == 0 ? 0 : 1; }\n").unwrap();
    let status = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}", concat!(env!("CARGO_MANIFEST_DIR"), "/include")))
        .arg(&src)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
}
