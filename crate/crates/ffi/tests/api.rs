use std::ffi::{CStr, CString};
use std::ptr;

use ssav_ffi::*;

const GM: &str = r#"{"dim": 1, "kappa": 2.0, "gamma": 1.0, "noise_matrix": 2.0, "alpha": 1.0, "c_h": 1000.0,
  "potential": {"name": "gaussian_mixture", "params": {"iota": 1.0, "sigma": 0.5}}}"#;

fn model(json: &str) -> *mut SsavModel {
    let text = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ssav_model_from_json(text.as_ptr(), &mut m) }, SsavStatus::Ok);
    m
}

fn last_error() -> String {
    let p = ssav_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn state(m: *const SsavModel, v: f64, u: f64) -> *mut SsavState {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ssav_state_new(m, &v, &u, 1, &mut s) }, SsavStatus::Ok);
    s
}

fn read(s: *const SsavState) -> (f64, f64, f64) {
    let (mut v, mut u, mut rho) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { ssav_state_get(s, &mut v, &mut u, 1, &mut rho) }, SsavStatus::Ok);
    (v, u, rho)
}

#[test]
fn model_round_trip() {
    let m = model(GM);
    unsafe {
        assert_eq!(ssav_model_dim(m), 1);
        let mut h = 0.0;
        assert_eq!(ssav_hamiltonian(m, &1.0, &0.0, 1, &mut h), SsavStatus::Ok);
        let mut rho = 0.0;
        assert_eq!(ssav_rho_init(m, &0.0, 1, &mut rho), SsavStatus::Ok);
        assert!(h.is_finite() && rho > 1.0);
        ssav_model_free(m);
    }
}

#[test]
fn malformed_config_is_a_parse_error() {
    let text = CString::new("{not json").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ssav_model_from_json(text.as_ptr(), &mut m) }, SsavStatus::Parse);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_and_length_errors() {
    let m = model(GM);
    unsafe {
        let mut out = 0.0;
        assert_eq!(ssav_hamiltonian(ptr::null(), &1.0, &1.0, 1, &mut out), SsavStatus::NullPointer);
        assert!(last_error().contains("model"));
        assert_eq!(ssav_hamiltonian(m, &1.0, &1.0, 2, &mut out), SsavStatus::InvalidArgument);
        assert_eq!(ssav_model_dim(ptr::null()), 0);
        ssav_model_free(ptr::null_mut());
        ssav_state_free(ptr::null_mut());
        ssav_sampler_free(ptr::null_mut());
        ssav_model_free(m);
    }
}

#[test]
fn non_positive_c_h_is_rejected() {
    let json = GM.replace("\"c_h\": 1000.0", "\"c_h\": 0.0");
    let text = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ssav_model_from_json(text.as_ptr(), &mut m) }, SsavStatus::InvalidArgument);
    assert!(last_error().contains("c_h"));
}

#[test]
fn small_c_h_reports_assumption_violation() {
    // double well at u = 1: κΦ + C_H − α|u|² ≈ −5/4 < 1
    let json = r#"{"dim": 1, "kappa": 1.0, "gamma": 1.0, "noise_matrix": 1.0, "alpha": 1.0, "c_h": 1e-6,
      "potential": {"name": "double_well"}}"#;
    let text = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    let status = unsafe { ssav_model_from_json(text.as_ptr(), &mut m) };
    if status == SsavStatus::Ok {
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { ssav_state_new(m, &0.0, &1.0, 1, &mut s) }, SsavStatus::AssumptionViolation);
        assert!(s.is_null());
        unsafe { ssav_model_free(m) };
    } else {
        assert_eq!(status, SsavStatus::AssumptionViolation, "{}", last_error());
    }
    assert!(last_error().contains("floor"));
}

#[test]
fn substep_conserves_modified_energy() {
    let m = model(GM);
    let s = state(m, 1.5, -0.7);
    unsafe {
        let mut e0 = 0.0;
        assert_eq!(ssav_modified_energy(m, s, &mut e0), SsavStatus::Ok);
        for _ in 0..50 {
            assert_eq!(ssav_deterministic_substep(m, s, 0.25), SsavStatus::Ok);
        }
        let mut e1 = 0.0;
        assert_eq!(ssav_modified_energy(m, s, &mut e1), SsavStatus::Ok);
        assert!(((e1 - e0) / e0).abs() < 1e-12, "{e0} -> {e1}");
        assert_eq!(ssav_deterministic_substep(m, s, -1.0), SsavStatus::InvalidArgument);
        ssav_state_free(s);
        ssav_model_free(m);
    }
}

#[test]
fn step_with_zero_noise_matches_substep_then_decay() {
    let m = model(GM);
    let a = state(m, 0.8, 0.3);
    let b = state(m, 0.8, 0.3);
    let h = 0.125;
    unsafe {
        assert_eq!(ssav_step(m, a, h, &0.0, &0.0, 1), SsavStatus::Ok);
        assert_eq!(ssav_deterministic_substep(m, b, h), SsavStatus::Ok);
        let (va, ua, ra) = read(a);
        let (vb, ub, rb) = read(b);
        assert_eq!((ua, ra), (ub, rb));
        assert!((va - (-h).exp() * vb).abs() < 1e-15);
        ssav_state_free(a);
        ssav_state_free(b);
        ssav_model_free(m);
    }
}

fn run_sampler(m: *const SsavModel, s: *const SsavState, seed: u64, path: u64, n: u64) -> (f64, f64, f64) {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(ssav_sampler_new(m, s, 1.0 / 64.0, seed, path, &mut p), SsavStatus::Ok);
        assert_eq!(ssav_sampler_advance(p, n / 2), SsavStatus::Ok);
        assert_eq!(ssav_sampler_advance(p, n - n / 2), SsavStatus::Ok);
        assert_eq!(ssav_sampler_steps(p), n);
        let (mut v, mut u, mut rho) = (0.0, 0.0, 0.0);
        assert_eq!(ssav_sampler_state(p, &mut v, &mut u, 1, &mut rho), SsavStatus::Ok);
        ssav_sampler_free(p);
        (v, u, rho)
    }
}

#[test]
fn sampler_is_deterministic_per_key() {
    let m = model(GM);
    let s = state(m, 1.0, 1.0);
    let a = run_sampler(m, s, 7, 3, 200);
    let b = run_sampler(m, s, 7, 3, 200);
    let c = run_sampler(m, s, 7, 4, 200);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.0.is_finite() && a.1.is_finite() && a.2.is_finite());
    // the source state is untouched
    assert_eq!(read(s).0, 1.0);
    unsafe {
        ssav_state_free(s);
        ssav_model_free(m);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ssav_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn sampler_matches_the_library_trajectory() {
    use ssav::noise::{CoupledNoise, NoisePlan};
    let m = model(GM);
    let s = state(m, 1.0, 1.0);
    let ffi = run_sampler(m, s, 9, 0, 64);
    let (lib_model, _) = ssav::model::presets::gaussian_mixture();
    let init = ssav::AugmentedState::initial(&lib_model, vec![1.0], vec![1.0]).unwrap();
    let h = 1.0 / 64.0;
    let plan = NoisePlan::uniform(9, 0, lib_model.gamma(), 1, h, 64);
    let rec = ssav::run_trajectory(&lib_model, &init, h, 64, ssav::Method::Ssav, &mut CoupledNoise::direct(&plan), 64)
        .unwrap();
    let last = rec.states.last().unwrap();
    assert_eq!(ffi, (last.v[0], last.u[0], last.rho));
    unsafe {
        ssav_state_free(s);
        ssav_model_free(m);
    }
}
