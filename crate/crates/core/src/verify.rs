//! Numerical self-checks grouped into suites. Each check reports its largest
//! residual against a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::abstract_quartic::{self as quartic, QuarticState};
use crate::cartpole::{CartState, CartpoleController};
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::matching::{control_force, ghat_residual, lambda_residual, matching_residuals, solve_characteristics, vhat_residual};
use crate::sim::{energy_audit, hhat_drift, integrate, CartLoop, QuarticLoop, DEFAULT_DT, DEFAULT_T_MAX_CART};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const CLOSED_FORM_REL_TOL: f64 = 1e-6;
pub const CHARACTERISTICS_TOL: f64 = 1e-6;
pub const ENERGY_REL_TOL: f64 = 1e-4;
pub const ENERGY_RATE_TOL: f64 = 1e-6;
pub const CONSERVATIVE_DRIFT_TOL: f64 = 1e-8;
pub const QUARTIC_PDE_TOL: f64 = 1e-9;
pub const BLOWUP_TRACK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Matching,
    Energy,
    Characteristics,
    Quartic,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "matching" => Suite::Matching,
            "energy" => Suite::Energy,
            "characteristics" => Suite::Characteristics,
            "quartic" => Suite::Quartic,
            "all" => Suite::All,
            _ => return Err(Error::InvalidArgument(format!("unknown suite {s:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Matching => "matching",
            Suite::Energy => "energy",
            Suite::Characteristics => "characteristics",
            Suite::Quartic => "quartic",
            Suite::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Tolerance for the algebraic matching residuals; other checks use fixed tolerances.
    pub tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { samples: 1000, seed: 42, tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, max_residual: f64, tolerance: f64) -> Self {
        Self { name: name.into(), max_residual, tolerance, pass: max_residual.is_finite() && max_residual <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Uniform states with `|θ|` strictly inside the positive-definite cone,
/// `|x| ≤ 2` and velocities in `[-2, 2]`.
pub fn sample_cone_states(ctrl: &CartpoleController, n: usize, seed: u64) -> Vec<CartState> {
    let theta_max = ctrl.validity().theta_max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            CartState::new(
                rng.gen_range(-theta_max..theta_max) * (1.0 - 1e-6),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            )
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

/// Matching residuals, closed-form versus generic control, and the λ, ĝ
/// and V̂ equations at random states in the cone.
pub fn matching_checks(ctrl: &CartpoleController, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let sys = ctrl.system_pair()?;
    let lam = ctrl.lambda_section();
    let g = &sys.plant().metric;
    let (mut res, mut rel, mut lam_res, mut gh_res, mut vh_res) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for s in sample_cone_states(ctrl, opts.samples, opts.seed) {
        let q = [s.theta, s.x];
        let v = DVector::from_vec(vec![s.theta_dot, s.x_dot]);
        res = res.max(matching_residuals(&sys, &q, &v)?.max_norm());
        // force as a covector: its ∂/∂x component is the actuator input
        let f = control_force(&sys, &q, &v)?;
        let u_generic = (g.components(&q)? * f)[1];
        rel = rel.max(relative_difference(ctrl.control_u(&s)?, u_generic));
        lam_res = lam_res.max(lambda_residual(&sys, &lam, &q, &v)?.abs());
        gh_res = gh_res.max(ghat_residual(&sys, &lam, &q, &v)?.abs());
        vh_res = vh_res.max(vhat_residual(&sys, &lam, &q)?.abs());
    }
    Ok(vec![
        Check::below("matching_residuals", res, opts.tol),
        Check::below("closed_form_vs_generic_rel", rel, CLOSED_FORM_REL_TOL),
        Check::below("lambda_equation", lam_res, opts.tol),
        Check::below("ghat_equation", gh_res, opts.tol),
        Check::below("vhat_equation", vh_res, opts.tol),
    ])
}

/// Initial state of the moderate-angle reference run.
pub const REFERENCE_IC: [f64; 4] = [0.5, 0.0, -0.5, 0.0];
/// Initial state of the conservative drift run.
pub const CONSERVATIVE_IC: [f64; 4] = [0.1, 0.0, 0.0, 0.0];
pub const CONSERVATIVE_T: f64 = 10.0;

/// Energy identity and monotonicity along the reference run, and drift of
/// `Ĥ` with dissipation switched off.
pub fn energy_checks(ctrl: &CartpoleController) -> Result<Vec<Check>> {
    let traj = integrate(&CartLoop::nonlinear(*ctrl), REFERENCE_IC, DEFAULT_DT, DEFAULT_T_MAX_CART)?;
    let audit = energy_audit(&traj, ctrl);
    let cons = ctrl.conservative();
    let cons_traj = integrate(&CartLoop::nonlinear(cons), CONSERVATIVE_IC, DEFAULT_DT, CONSERVATIVE_T)?;
    Ok(vec![
        Check::below("energy_identity_rel", audit.max_relative_deviation, ENERGY_REL_TOL),
        Check::below("max_hhat_rate", audit.max_rate, ENERGY_RATE_TOL),
        Check::below("conservative_hhat_drift", hhat_drift(&cons_traj), CONSERVATIVE_DRIFT_TOL),
    ])
}

/// Numeric characteristic solution versus the closed-form `ĝ₁₁` and `V̂`
/// on a 50×50 grid over `|θ| ≤ 1.2`, `|x| ≤ 2`.
pub fn characteristics_checks(ctrl: &CartpoleController) -> Result<Vec<Check>> {
    let sol = solve_characteristics(
        &ctrl.characteristic_data(),
        ctrl.b,
        Axis::new(-1.2, 1.2, 50)?,
        Axis::new(-2.0, 2.0, 50)?,
    )?;
    let (mut g11, mut g12, mut g22, mut vh) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for c in &sol.cells {
        let gh = ctrl.ghat(c.theta);
        g11 = g11.max((c.ghat11 - gh[(0, 0)]).abs());
        g12 = g12.max((c.ghat12 - gh[(0, 1)]).abs());
        g22 = g22.max((c.ghat22 - gh[(1, 1)]).abs());
        vh = vh.max((c.vhat - ctrl.vhat(c.theta, c.x)).abs());
    }
    Ok(vec![
        Check::below("ghat11", g11, CHARACTERISTICS_TOL),
        Check::below("ghat12", g12, CHARACTERISTICS_TOL),
        Check::below("ghat22", g22, CHARACTERISTICS_TOL),
        Check::below("vhat", vh, CHARACTERISTICS_TOL),
    ])
}

/// RK4 open-loop run from blow-up data, compared to the closed form while
/// `x ≤ x_stop`. Returns the largest relative error in `x`.
pub fn blowup_tracking_error(eps: f64, dt: f64, x_stop: f64) -> Result<f64> {
    let s0 = quartic::blowup_solution(eps, 0.0)?.to_array();
    let t_max = quartic::blowup_time(eps);
    let mut worst = 0.0_f64;
    let mut done = false;
    crate::sim::integrate_observe(&QuarticLoop { controlled: false }, s0, dt, t_max, |smp| {
        if done || smp.state[0] > x_stop {
            done = true;
            return;
        }
        if let Ok(exact) = quartic::blowup_solution(eps, smp.t) {
            if exact.x <= x_stop {
                worst = worst.max(relative_difference(smp.state[0], exact.x));
            }
        }
    })?;
    Ok(worst)
}

/// Quartic example: `V̂` PDE, `P f = 0`, the blow-up solution, and the
/// controllability defect.
pub fn quartic_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let sys = quartic::system_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut pde, mut pf) = (0.0_f64, 0.0_f64);
    for _ in 0..opts.samples {
        let s = QuarticState::from_array([(); 4].map(|_| rng.gen_range(-2.0..2.0)));
        let dvh = quartic::vhat_gradient(s.x, s.y);
        let dv = quartic::potential_v_gradient(s.x, s.y);
        pde = pde.max((dvh[0] + dvh[1] - dv[0]).abs());
        let f = control_force(&sys, &[s.x, s.y], &DVector::from_vec(vec![s.x_dot, s.y_dot]))?;
        pf = pf.max(f[0].abs());
    }
    let eps = 0.1;
    let t_stop = (1.0 / eps - 0.1) / 3.0_f64.sqrt();
    let analytic = (0..=100)
        .map(|i| {
            let t = t_stop * i as f64 / 100.0;
            let s = quartic::blowup_solution(eps, t)?;
            Ok(quartic::blowup_residual(eps, t)?.abs() / (6.0 * s.x.powi(3)))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let rank = quartic::controllability_rank();
    Ok(vec![
        Check::below("vhat_pde", pde, QUARTIC_PDE_TOL),
        Check::below("unactuated_force", pf, QUARTIC_PDE_TOL),
        Check::below("blowup_residual_rel", analytic, 1e-12),
        Check::below("blowup_tracking_rel", blowup_tracking_error(eps, DEFAULT_DT, 10.0)?, BLOWUP_TRACK_TOL),
        Check { name: "controllability_rank".into(), max_residual: rank as f64, tolerance: 2.0, pass: rank == 2 },
    ])
}

/// Runs `suite` with the given controller for the cart checks.
pub fn run_suite(suite: Suite, ctrl: &CartpoleController, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let want = |s: Suite| suite == s || suite == Suite::All;
    let mut add = |prefix: &str, cs: Vec<Check>| {
        checks.extend(cs.into_iter().map(|mut c| {
            c.name = format!("{prefix}.{}", c.name);
            c
        }))
    };
    if want(Suite::Matching) {
        add("matching", matching_checks(ctrl, opts)?);
    }
    if want(Suite::Energy) {
        add("energy", energy_checks(ctrl)?);
    }
    if want(Suite::Characteristics) {
        add("characteristics", characteristics_checks(ctrl)?);
    }
    if want(Suite::Quartic) {
        add("quartic", quartic_checks(opts)?);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { suite, seed: opts.seed, samples: opts.samples, checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in ["matching", "energy", "characteristics", "quartic", "all"] {
            assert_eq!(s.parse::<Suite>().unwrap().to_string(), s);
        }
        assert!("lyapunov".parse::<Suite>().is_err());
    }

    #[test]
    fn cone_samples_are_inside_and_seeded() {
        let c = CartpoleController::reference();
        let a = sample_cone_states(&c, 50, 7);
        assert_eq!(a, sample_cone_states(&c, 50, 7));
        assert_ne!(a, sample_cone_states(&c, 50, 8));
        assert!(a.iter().all(|s| c.in_cone(s.theta)));
    }

    #[test]
    fn small_matching_suite_passes() {
        let opts = VerifyOptions { samples: 50, ..VerifyOptions::default() };
        let r = run_suite(Suite::Matching, &CartpoleController::reference(), &opts).unwrap();
        assert!(r.pass, "{r:#?}");
    }

    #[test]
    fn relative_difference_basics() {
        assert_eq!(relative_difference(0.0, 0.0), 0.0);
        assert_eq!(relative_difference(1.0, 1.0), 0.0);
        assert!((relative_difference(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
