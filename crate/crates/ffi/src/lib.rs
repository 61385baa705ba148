//! C ABI over `matchctl`.
//!
//! Every function returns an [`McStatus`]; results are written through out
//! pointers. Handles are opaque and must be released with the matching
//! `*_free` function. After a non-OK status, [`mc_last_error_message`] gives
//! a description for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use matchctl::abstract_quartic::{control_u_quartic, QuarticState};
use matchctl::cartpole::{nondimensionalize, CartState, CartpoleController, Phi, PhysicalCart};
use matchctl::linear_compare::{reference_gains, pole_place, LinearGains};
use matchctl::sim::{classify, integrate, CartLoop, OutcomeTag, QuarticLoop, Trajectory};
use matchctl::Error;
use nalgebra::Complex;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidParameters = 3,
    OutsideRegion = 4,
    Degenerate = 5,
    NotControllable = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

/// Feedback law for cart simulations.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McLaw {
    Nonlinear = 0,
    Linear = 1,
    Open = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McOutcomeTag {
    Settled = 0,
    Diverged = 1,
    Undetermined = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McValidity {
    pub ok: bool,
    pub cos2_bound: f64,
    pub theta_max: f64,
}

/// One trajectory sample. `state` is `[θ, x, θ̇, ẋ]` for the cart and
/// `[x, y, ẋ, ẏ]` for the quartic system.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSample {
    pub t: f64,
    pub state: [f64; 4],
    pub u: f64,
    pub hhat: f64,
    pub dhhat_dt: f64,
}

/// `settle_time` is NaN unless `tag` is settled.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOutcome {
    pub tag: McOutcomeTag,
    pub settle_time: f64,
    pub max_excursion: f64,
}

/// Opaque controller handle.
pub struct McController(CartpoleController);

/// Opaque trajectory handle.
pub struct McTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> McStatus {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::NonFiniteState(_) | Error::Json(_) => {
            McStatus::InvalidArgument
        }
        Error::InvalidParameters(_) | Error::ComplexPolesNotConjugate | Error::PastBlowup { .. } => {
            McStatus::InvalidParameters
        }
        Error::OutsideRegion { .. } | Error::CharacteristicEscape { .. } => McStatus::OutsideRegion,
        Error::SingularMetric { .. } | Error::DegenerateModelMetric { .. } | Error::AsymmetricMetric { .. } => {
            McStatus::Degenerate
        }
        Error::NotControllable { .. } => McStatus::NotControllable,
        Error::QuadratureFailure { .. } => McStatus::Numerical,
        Error::Io(_) => McStatus::Io,
    }
}

fn fail(status: McStatus, msg: impl Into<String>) -> McStatus {
    set_last_error(msg.into());
    status
}

fn from_error(e: Error) -> McStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, converting panics into [`McStatus::Panic`].
fn guard(f: impl FnOnce() -> McStatus) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(McStatus::Panic, "internal panic"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(McStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        })+
    };
}

unsafe fn read_state(p: *const f64) -> [f64; 4] {
    let mut s = [0.0; 4];
    ptr::copy_nonoverlapping(p, s.as_mut_ptr(), 4);
    s
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last non-OK status on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Scaled coupling `b` of a physical cart (SI units).
///
/// # Safety
/// `out_b` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mc_nondimensionalize(
    base_mass: f64,
    pendulum_mass: f64,
    length: f64,
    inertia: f64,
    gravity: f64,
    out_b: *mut f64,
) -> McStatus {
    non_null!(out_b);
    guard(|| {
        let cart = PhysicalCart { base_mass, pendulum_mass, length, inertia, gravity };
        match nondimensionalize(&cart) {
            Ok(b) => {
                *out_b = b;
                McStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Controller with constant damping gain `phi`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_new(
    b: f64,
    sigma0: f64,
    mu0: f64,
    r: f64,
    w1: f64,
    phi: f64,
    out: *mut *mut McController,
) -> McStatus {
    non_null!(out);
    guard(|| {
        if !(phi > 0.0) {
            return fail(McStatus::InvalidParameters, format!("phi must be positive, got {phi}"));
        }
        match CartpoleController::new(b, sigma0, mu0, r, w1, Phi::Const(phi)) {
            Ok(c) => {
                write_handle(out, McController(c));
                McStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Controller with the published constants.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_default(out: *mut *mut McController) -> McStatus {
    non_null!(out);
    guard(|| {
        write_handle(out, McController(CartpoleController::reference()));
        McStatus::Ok
    })
}

/// Controller from a JSON parameter document (NUL-terminated UTF-8).
///
/// # Safety
/// `json` must be a valid C string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_from_json(json: *const c_char, out: *mut *mut McController) -> McStatus {
    non_null!(json, out);
    guard(|| {
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(McStatus::InvalidArgument, "parameters are not valid UTF-8");
        };
        match CartpoleController::from_json_str(text) {
            Ok(c) => {
                write_handle(out, McController(c));
                McStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a controller. NULL is ignored.
///
/// # Safety
/// `ctrl` must come from one of the constructors and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_free(ctrl: *mut McController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Control input at `state = [θ, x, θ̇, ẋ]`.
///
/// # Safety
/// `state` must point to four doubles; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_control(
    ctrl: *const McController,
    state: *const f64,
    out_u: *mut f64,
) -> McStatus {
    non_null!(ctrl, state, out_u);
    guard(|| match (*ctrl).0.control_u(&CartState::from_array(read_state(state))) {
        Ok(u) => {
            *out_u = u;
            McStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// Controlled energy and its predicted rate at `state`.
///
/// # Safety
/// `state` must point to four doubles; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_energy(
    ctrl: *const McController,
    state: *const f64,
    out_hhat: *mut f64,
    out_rate: *mut f64,
) -> McStatus {
    non_null!(ctrl, state, out_hhat, out_rate);
    guard(|| {
        let s = CartState::from_array(read_state(state));
        *out_hhat = (*ctrl).0.hhat(&s);
        *out_rate = (*ctrl).0.dhhat_dt_formula(&s);
        McStatus::Ok
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_controller_validity(ctrl: *const McController, out: *mut McValidity) -> McStatus {
    non_null!(ctrl, out);
    guard(|| {
        let v = (*ctrl).0.validity();
        *out = McValidity { ok: v.ok, cos2_bound: v.cos2_bound, theta_max: v.theta_max };
        McStatus::Ok
    })
}

/// Published linear gains `[k_θ, k_x, k_θ̇, k_ẋ]`.
///
/// # Safety
/// `out_gains` must point to four writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_reference_gains(out_gains: *mut f64) -> McStatus {
    non_null!(out_gains);
    guard(|| {
        ptr::copy_nonoverlapping(reference_gains().to_array().as_ptr(), out_gains, 4);
        McStatus::Ok
    })
}

/// Gains placing the closed-loop poles at `re[i] + i·im[i]`.
///
/// # Safety
/// `re`, `im` must point to four doubles, `out_gains` to four writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_pole_place(b: f64, re: *const f64, im: *const f64, out_gains: *mut f64) -> McStatus {
    non_null!(re, im, out_gains);
    guard(|| {
        let (r, i) = (read_state(re), read_state(im));
        let poles = [0, 1, 2, 3].map(|k| Complex::new(r[k], i[k]));
        match pole_place(b, &poles) {
            Ok(k) => {
                ptr::copy_nonoverlapping(k.to_array().as_ptr(), out_gains, 4);
                McStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Quartic-example control input at `state = [x, y, ẋ, ẏ]`.
///
/// # Safety
/// `state` must point to four doubles, `out_u` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mc_quartic_control(state: *const f64, out_u: *mut f64) -> McStatus {
    non_null!(state, out_u);
    guard(|| {
        *out_u = control_u_quartic(&QuarticState::from_array(read_state(state)));
        McStatus::Ok
    })
}

/// Integrates the cart under `law`. `gains` (four doubles) is used only by
/// the linear law and may be NULL for the published gains. Energy columns
/// refer to `ctrl`.
///
/// # Safety
/// `ctrl`, `s0` (four doubles) and `out` must be valid; `gains` NULL or four doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_simulate_cartpole(
    ctrl: *const McController,
    law: McLaw,
    gains: *const f64,
    s0: *const f64,
    dt: f64,
    t_max: f64,
    out: *mut *mut McTrajectory,
) -> McStatus {
    non_null!(ctrl, s0, out);
    guard(|| {
        let c = (*ctrl).0;
        let sys = match law {
            McLaw::Nonlinear => CartLoop::nonlinear(c),
            McLaw::Linear => {
                let k = if gains.is_null() { reference_gains() } else { LinearGains::from_array(read_state(gains)) };
                CartLoop::linear(k, c)
            }
            McLaw::Open => CartLoop::open(c),
        };
        match integrate(&sys, read_state(s0), dt, t_max) {
            Ok(t) => {
                write_handle(out, McTrajectory(t));
                McStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Integrates the quartic example, with or without its controller.
///
/// # Safety
/// `s0` must point to four doubles, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mc_simulate_quartic(
    controlled: bool,
    s0: *const f64,
    dt: f64,
    t_max: f64,
    out: *mut *mut McTrajectory,
) -> McStatus {
    non_null!(s0, out);
    guard(|| match integrate(&QuarticLoop { controlled }, read_state(s0), dt, t_max) {
        Ok(t) => {
            write_handle(out, McTrajectory(t));
            McStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_trajectory_len(traj: *const McTrajectory, out_len: *mut usize) -> McStatus {
    non_null!(traj, out_len);
    *out_len = (*traj).0.samples.len();
    McStatus::Ok
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_trajectory_sample(
    traj: *const McTrajectory,
    index: usize,
    out: *mut McSample,
) -> McStatus {
    non_null!(traj, out);
    let traj = &*traj;
    let Some(s) = traj.0.samples.get(index) else {
        return fail(McStatus::InvalidArgument, format!("sample index {index} out of range"));
    };
    *out = McSample { t: s.t, state: s.state, u: s.u, hhat: s.hhat, dhhat_dt: s.dhhat_dt };
    McStatus::Ok
}

/// Whether integration stopped at the divergence guard.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_trajectory_diverged(traj: *const McTrajectory, out: *mut bool) -> McStatus {
    non_null!(traj, out);
    *out = (*traj).0.meta.diverged;
    McStatus::Ok
}

/// Classifies the trajectory with settling band `settle_eps` held for `hold`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mc_trajectory_classify(
    traj: *const McTrajectory,
    settle_eps: f64,
    hold: f64,
    out: *mut McOutcome,
) -> McStatus {
    non_null!(traj, out);
    guard(|| {
        let o = classify(&(*traj).0, settle_eps, hold);
        let tag = match o.tag {
            OutcomeTag::Settled => McOutcomeTag::Settled,
            OutcomeTag::Diverged => McOutcomeTag::Diverged,
            OutcomeTag::Undetermined => McOutcomeTag::Undetermined,
        };
        *out = McOutcome { tag, settle_time: o.settle_time.unwrap_or(f64::NAN), max_excursion: o.max_excursion };
        McStatus::Ok
    })
}

/// Releases a trajectory. NULL is ignored.
///
/// # Safety
/// `traj` must come from a simulate function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mc_trajectory_free(traj: *mut McTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
