use std::ffi::{CStr, CString};
use std::ptr;

use hjrate_ffi::*;

fn last_error() -> String {
    let p = hj_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn gridfn(dim: usize, n: usize, values: &[f64]) -> (*mut HjGrid, *mut HjGridFn) {
    let mut g = ptr::null_mut();
    assert_eq!(hj_grid_new(dim, n, 1.0, &mut g), HjStatus::Ok);
    let mut f = ptr::null_mut();
    assert_eq!(hj_gridfn_new(g, values.as_ptr(), values.len(), &mut f), HjStatus::Ok);
    (g, f)
}

#[test]
fn envelope_round_trip_matches_library() {
    let values: Vec<f64> = (0..64).map(|k| ((k * 37 % 64) as f64 / 64.0).sin()).collect();
    unsafe {
        let (g, f) = gridfn(1, 64, &values);
        let mut env = ptr::null_mut();
        assert_eq!(hj_sup_convolution(f, 0.01, &mut env), HjStatus::Ok);
        assert_eq!(hj_envelope_len(env), 64);
        let mut out = vec![0.0; 64];
        let mut arg = vec![0usize; 64];
        assert_eq!(hj_envelope_copy_values(env, out.as_mut_ptr(), out.len()), HjStatus::Ok);
        assert_eq!(hj_envelope_copy_argmax(env, arg.as_mut_ptr(), arg.len()), HjStatus::Ok);

        let grid = hjrate::Grid::new(1, 64, 1.0).unwrap();
        let direct = hjrate::sup_convolution(&hjrate::GridFn::new(grid, values.clone()).unwrap(), 0.01).unwrap();
        assert_eq!(out, direct.envelope().values());
        assert_eq!(arg, direct.arg_map());

        let mut small = vec![0.0; 10];
        assert_eq!(hj_envelope_copy_values(env, small.as_mut_ptr(), small.len()), HjStatus::BufferTooSmall);
        assert!(last_error().contains("buffer"));

        let mut inf = ptr::null_mut();
        assert_eq!(hj_inf_convolution(f, 0.01, &mut inf), HjStatus::Ok);
        hj_envelope_free(inf);
        hj_envelope_free(env);
        hj_gridfn_free(f);
        hj_grid_free(g);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(hj_grid_new(3, 8, 1.0, &mut g), HjStatus::InvalidGrid);
        assert!(g.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(hj_grid_new(1, 8, 1.0, ptr::null_mut()), HjStatus::NullPointer);

        let (g, f) = gridfn(1, 8, &[0.0; 8]);
        let mut bad = ptr::null_mut();
        assert_eq!(hj_gridfn_new(g, [0.0; 3].as_ptr(), 3, &mut bad), HjStatus::InvalidArgument);
        let mut env = ptr::null_mut();
        assert_eq!(hj_sup_convolution(f, -1.0, &mut env), HjStatus::InvalidArgument);
        assert_eq!(hj_sup_convolution(ptr::null(), 0.1, &mut env), HjStatus::NullPointer);

        let (g2, f2) = gridfn(1, 16, &[0.0; 16]);
        let mut d = 0.0;
        assert_eq!(hj_sup_norm_diff(f, f2, &mut d), HjStatus::GridMismatch);
        assert_eq!(hj_sup_norm_diff(f, f, &mut d), HjStatus::Ok);
        assert_eq!(d, 0.0);

        hj_gridfn_free(f2);
        hj_grid_free(g2);
        hj_gridfn_free(f);
        hj_grid_free(g);
        hj_grid_free(ptr::null_mut());
        assert_eq!(hj_grid_len(ptr::null()), 0);
    }
}

#[test]
fn scalar_helpers() {
    unsafe {
        let mut b = 0.0;
        assert_eq!(hj_heat_bound(1.0, 0.0, 0.25, 0.01, &mut b), HjStatus::Ok);
        assert_eq!(b, 0.2);
        assert_eq!(hj_heat_bound(-1.0, 0.0, 0.25, 0.01, &mut b), HjStatus::InvalidArgument);

        let eps = [1e-4, 1e-3, 1e-2, 1e-1];
        let err: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.sqrt()).collect();
        let mut fit = HjRateFit::default();
        assert_eq!(hj_fit_rate(eps.as_ptr(), err.as_ptr(), 4, &mut fit), HjStatus::Ok);
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert_eq!(fit.points, 4);
        assert_eq!(hj_fit_rate(eps.as_ptr(), err.as_ptr(), 2, &mut fit), HjStatus::InsufficientPoints);

        let values: Vec<f64> = (0..32).map(|k| (k as f64 / 32.0 * std::f64::consts::TAU).sin()).collect();
        let (g, f) = gridfn(1, 32, &values);
        let mut s = 0.0;
        assert_eq!(hj_holder_seminorm(f, 1.0, &mut s), HjStatus::Ok);
        assert!(s > 6.0 && s < 6.3);
        hj_gridfn_free(f);
        hj_grid_free(g);

        assert!(CStr::from_ptr(hj_version()).to_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    }
}

#[test]
fn sweep_from_json() {
    let config = r#"{
      "problem": {
        "hamiltonian": {"kind": "constant", "params": {"value": 0.0}, "C_H": 0.0, "beta": 1.0, "gamma": 0.0},
        "diffusion": {"kind": "laplacian", "Lambda": 1.0, "C_F": 0.0},
        "u0": {"kind": "triangle", "params": {"amplitude": 1.0}, "eta": 1.0, "seminorm": 1.0},
        "u_holder": {"alpha": 1.0, "seminorm": 1.0},
        "T": 0.5,
        "grid": {"dim": 1, "N": 256, "L": 1.0}
      },
      "epsilons": {"eps_max": 0.01, "eps_min": 0.0001, "count": 5},
      "reference": "oracle",
      "bound": "heat"
    }"#;
    let c = CString::new(config).unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        let mut passed = false;
        assert_eq!(hj_run_sweep_json(c.as_ptr(), false, &mut report, &mut passed), HjStatus::Ok, "{}", last_error_or_none());
        let json = CStr::from_ptr(report).to_str().unwrap().to_owned();
        hj_string_free(report);
        let parsed: hjrate::harness::SweepReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.rows.len(), 5);
        assert_eq!(passed, parsed.passed());
        assert!(passed);

        let broken = CString::new("{\"epsilons\": 1}").unwrap();
        assert_eq!(hj_run_sweep_json(broken.as_ptr(), false, &mut report, &mut passed), HjStatus::Config);
    }
}

fn last_error_or_none() -> String {
    let p = hj_last_error_message();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}
