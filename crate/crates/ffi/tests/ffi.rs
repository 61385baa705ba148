use std::ffi::{CStr, CString};
use std::ptr;

use matchctl_ffi::*;

fn last_error() -> String {
    let p = mc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn default_controller() -> *mut McController {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { mc_controller_default(&mut c) }, McStatus::Ok);
    assert!(!c.is_null());
    c
}

#[test]
fn nondimensionalize_lab_cart() {
    let mut b = 0.0;
    assert_eq!(unsafe { mc_nondimensionalize(5.02, 0.454, 0.425, 0.11, 9.81, &mut b) }, McStatus::Ok);
    assert!((b - 0.188).abs() < 5e-4);
    assert_eq!(unsafe { mc_nondimensionalize(-1.0, 0.454, 0.425, 0.11, 9.81, &mut b) }, McStatus::InvalidParameters);
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_rejected() {
    assert_eq!(unsafe { mc_nondimensionalize(5.02, 0.454, 0.425, 0.11, 9.81, ptr::null_mut()) }, McStatus::NullPointer);
    assert!(last_error().contains("out_b"));
    let mut u = 0.0;
    assert_eq!(unsafe { mc_controller_control(ptr::null(), [0.0; 4].as_ptr(), &mut u) }, McStatus::NullPointer);
    assert_eq!(unsafe { mc_quartic_control(ptr::null(), &mut u) }, McStatus::NullPointer);
    unsafe {
        mc_controller_free(ptr::null_mut());
        mc_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn controller_queries() {
    let c = default_controller();
    let mut u = f64::NAN;
    assert_eq!(unsafe { mc_controller_control(c, [0.0; 4].as_ptr(), &mut u) }, McStatus::Ok);
    assert_eq!(u, 0.0);
    assert_eq!(unsafe { mc_controller_control(c, [0.0, 0.1, 0.0, 0.0].as_ptr(), &mut u) }, McStatus::Ok);
    assert!((u - 0.16146).abs() < 1e-4);

    let mut v = McValidity { ok: false, cos2_bound: 0.0, theta_max: 0.0 };
    assert_eq!(unsafe { mc_controller_validity(c, &mut v) }, McStatus::Ok);
    assert!(v.ok);
    assert!((v.cos2_bound - 4.38 / 94.0).abs() < 1e-12);

    let theta_edge = [v.theta_max, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { mc_controller_control(c, theta_edge.as_ptr(), &mut u) }, McStatus::Degenerate);

    let (mut h, mut rate) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { mc_controller_energy(c, [0.0, 0.0, 0.1, 0.0].as_ptr(), &mut h, &mut rate) }, McStatus::Ok);
    assert!(h > 0.0 && rate < 0.0);
    unsafe { mc_controller_free(c) };
}

#[test]
fn controller_construction() {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { mc_controller_new(0.188, -0.05, 10.0, 1000.0, 1.5, 1.0, &mut c) }, McStatus::Ok);
    unsafe { mc_controller_free(c) };
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { mc_controller_new(0.188, 0.05, 10.0, 1000.0, 1.5, 1.0, &mut bad) }, McStatus::InvalidParameters);
    assert!(bad.is_null());
    assert_eq!(unsafe { mc_controller_new(0.188, -0.05, 10.0, 1000.0, 1.5, 0.0, &mut bad) }, McStatus::InvalidParameters);

    let json = CString::new(r#"{"phi": "poly:1,0.5,0"}"#).unwrap();
    assert_eq!(unsafe { mc_controller_from_json(json.as_ptr(), &mut c) }, McStatus::Ok);
    unsafe { mc_controller_free(c) };
    let json = CString::new("{not json").unwrap();
    assert_eq!(unsafe { mc_controller_from_json(json.as_ptr(), &mut bad) }, McStatus::InvalidArgument);
}

#[test]
fn gains_and_pole_placement() {
    let mut k = [0.0; 4];
    assert_eq!(unsafe { mc_reference_gains(k.as_mut_ptr()) }, McStatus::Ok);
    assert_eq!(k, [1021.0, 115.8, 918.5, 158.2]);
    let re = [-5.0, -6.0, -2.0, -2.0];
    let im = [0.0; 4];
    assert_eq!(unsafe { mc_pole_place(0.188, re.as_ptr(), im.as_ptr(), k.as_mut_ptr()) }, McStatus::Ok);
    assert!((k[0] - 1021.0).abs() < 1.0);
    let im = [1.0, 1.0, 0.0, 0.0];
    assert_eq!(unsafe { mc_pole_place(0.188, re.as_ptr(), im.as_ptr(), k.as_mut_ptr()) }, McStatus::InvalidParameters);
    let im = [0.0; 4];
    assert_eq!(unsafe { mc_pole_place(0.0, re.as_ptr(), im.as_ptr(), k.as_mut_ptr()) }, McStatus::NotControllable);
}

#[test]
fn quartic_control_value() {
    let mut u = 0.0;
    assert_eq!(unsafe { mc_quartic_control([1.0, 0.0, 0.0, 0.0].as_ptr(), &mut u) }, McStatus::Ok);
    assert_eq!(u, 20.0);
}

#[test]
fn simulate_and_inspect() {
    let c = default_controller();
    let mut t = ptr::null_mut();
    let s0 = [0.5, 0.0, -0.5, 0.0];
    assert_eq!(unsafe { mc_simulate_cartpole(c, McLaw::Linear, ptr::null(), s0.as_ptr(), 1e-3, 20.0, &mut t) }, McStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { mc_trajectory_len(t, &mut n) }, McStatus::Ok);
    assert_eq!(n, 20_001);
    let mut smp = McSample { t: -1.0, state: [0.0; 4], u: 0.0, hhat: 0.0, dhhat_dt: 0.0 };
    assert_eq!(unsafe { mc_trajectory_sample(t, 0, &mut smp) }, McStatus::Ok);
    assert_eq!((smp.t, smp.state), (0.0, s0));
    assert_eq!(unsafe { mc_trajectory_sample(t, n, &mut smp) }, McStatus::InvalidArgument);
    let mut o = McOutcome { tag: McOutcomeTag::Undetermined, settle_time: 0.0, max_excursion: 0.0 };
    assert_eq!(unsafe { mc_trajectory_classify(t, 1e-2, 2.0, &mut o) }, McStatus::Ok);
    assert_eq!(o.tag, McOutcomeTag::Settled);
    assert!(o.settle_time > 0.0);
    unsafe { mc_trajectory_free(t) };

    let s0 = [1.25, 0.0, 1.3, 0.0];
    assert_eq!(unsafe { mc_simulate_cartpole(c, McLaw::Linear, ptr::null(), s0.as_ptr(), 1e-3, 20.0, &mut t) }, McStatus::Ok);
    let mut diverged = false;
    assert_eq!(unsafe { mc_trajectory_diverged(t, &mut diverged) }, McStatus::Ok);
    assert!(diverged);
    assert_eq!(unsafe { mc_trajectory_classify(t, 1e-2, 2.0, &mut o) }, McStatus::Ok);
    assert_eq!(o.tag, McOutcomeTag::Diverged);
    assert!(o.settle_time.is_nan());
    unsafe { mc_trajectory_free(t) };

    let bad = [f64::NAN, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { mc_simulate_cartpole(c, McLaw::Open, ptr::null(), bad.as_ptr(), 1e-3, 1.0, &mut t) }, McStatus::InvalidArgument);
    unsafe { mc_controller_free(c) };
}

#[test]
fn quartic_simulation() {
    let mut t = ptr::null_mut();
    let s0 = [0.5, -0.5, 0.0, 0.0];
    assert_eq!(unsafe { mc_simulate_quartic(true, s0.as_ptr(), 1e-3, 1.0, &mut t) }, McStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { mc_trajectory_len(t, &mut n) }, McStatus::Ok);
    assert_eq!(n, 1001);
    unsafe { mc_trajectory_free(t) };
    assert_eq!(unsafe { mc_simulate_quartic(true, s0.as_ptr(), 0.0, 1.0, &mut t) }, McStatus::InvalidArgument);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/matchctl.h")).unwrap();
    for name in [
        "mc_last_error_message",
        "mc_nondimensionalize",
        "mc_controller_new",
        "mc_controller_default",
        "mc_controller_from_json",
        "mc_controller_free",
        "mc_controller_control",
        "mc_controller_energy",
        "mc_controller_validity",
        "mc_reference_gains",
        "mc_pole_place",
        "mc_quartic_control",
        "mc_simulate_cartpole",
        "mc_simulate_quartic",
        "mc_trajectory_len",
        "mc_trajectory_sample",
        "mc_trajectory_diverged",
        "mc_trajectory_classify",
        "mc_trajectory_free",
        "typedef struct McController McController;",
        "MC_STATUS_NULL_POINTER = 1",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
