//! Closed-loop simulation, outcome classification, energy auditing and the
//! basin-of-attraction sweep.

use std::fmt;
use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::abstract_quartic::{self as quartic, QuarticState};
use crate::cartpole::{dynamics, CartState, CartpoleController};
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::linear_compare::LinearGains;
use crate::ode::rk4_step;

/// Integration halts once any state component exceeds this magnitude.
pub const DIVERGENCE_GUARD: f64 = 1e4;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_MAX_CART: f64 = 20.0;
pub const DEFAULT_T_MAX_QUARTIC: f64 = 500.0;
pub const DEFAULT_SETTLE_EPS: f64 = 1e-2;
pub const DEFAULT_HOLD: f64 = 2.0;
pub const DEFAULT_MAX_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Cartpole,
    Quartic,
}

/// A plant together with its feedback law, in first-order form over a
/// four-component state.
pub trait ClosedLoop: Sync {
    /// Control input at `s`; NaN when the law is undefined there.
    fn control(&self, s: &[f64; 4]) -> f64;
    fn derivative(&self, s: &[f64; 4], u: f64) -> [f64; 4];
    /// `(Ĥ, dĤ/dt formula)` for reporting.
    fn energy(&self, s: &[f64; 4]) -> (f64, f64);
    fn id(&self) -> String;
    fn system(&self) -> SystemKind;
}

/// Feedback law applied to the cart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CartLaw {
    Nonlinear(CartpoleController),
    Linear(LinearGains),
    Open,
}

/// The scaled cart under a feedback law. Energy columns always refer to
/// `energy_ref`, which is the nonlinear controller itself when that is the law.
#[derive(Debug, Clone, Copy)]
pub struct CartLoop {
    pub b: f64,
    pub law: CartLaw,
    pub energy_ref: CartpoleController,
}

impl CartLoop {
    pub fn nonlinear(ctrl: CartpoleController) -> Self {
        Self { b: ctrl.b, law: CartLaw::Nonlinear(ctrl), energy_ref: ctrl }
    }

    pub fn linear(gains: LinearGains, energy_ref: CartpoleController) -> Self {
        Self { b: energy_ref.b, law: CartLaw::Linear(gains), energy_ref }
    }

    pub fn open(energy_ref: CartpoleController) -> Self {
        Self { b: energy_ref.b, law: CartLaw::Open, energy_ref }
    }
}

impl ClosedLoop for CartLoop {
    fn control(&self, s: &[f64; 4]) -> f64 {
        let cs = CartState::from_array(*s);
        match &self.law {
            CartLaw::Nonlinear(c) => c.control_u(&cs).unwrap_or(f64::NAN),
            CartLaw::Linear(k) => k.u(&cs),
            CartLaw::Open => 0.0,
        }
    }

    fn derivative(&self, s: &[f64; 4], u: f64) -> [f64; 4] {
        dynamics(self.b, &CartState::from_array(*s), u)
    }

    fn energy(&self, s: &[f64; 4]) -> (f64, f64) {
        let cs = CartState::from_array(*s);
        (self.energy_ref.hhat(&cs), self.energy_ref.dhhat_dt_formula(&cs))
    }

    fn id(&self) -> String {
        match &self.law {
            CartLaw::Nonlinear(c) => format!(
                "cartpole/nonlinear(b={},sigma0={},mu0={},r={},w1={},phi={})",
                c.b, c.sigma0, c.mu0, c.r, c.w1, c.phi
            ),
            CartLaw::Linear(k) => {
                format!("cartpole/linear({},{},{},{})", k.k_theta, k.k_x, k.k_thetadot, k.k_xdot)
            }
            CartLaw::Open => "cartpole/none".into(),
        }
    }

    fn system(&self) -> SystemKind {
        SystemKind::Cartpole
    }
}

/// The quartic example, controlled or open loop.
#[derive(Debug, Clone, Copy)]
pub struct QuarticLoop {
    pub controlled: bool,
}

impl ClosedLoop for QuarticLoop {
    fn control(&self, s: &[f64; 4]) -> f64 {
        if self.controlled {
            quartic::control_u_quartic(&QuarticState::from_array(*s))
        } else {
            0.0
        }
    }

    fn derivative(&self, s: &[f64; 4], u: f64) -> [f64; 4] {
        quartic::dynamics_quartic(&QuarticState::from_array(*s), u)
    }

    fn energy(&self, s: &[f64; 4]) -> (f64, f64) {
        let qs = QuarticState::from_array(*s);
        (quartic::hhat_quartic(&qs), quartic::hhat_rate_quartic(&qs))
    }

    fn id(&self) -> String {
        if self.controlled { "quartic/nonlinear" } else { "quartic/none" }.into()
    }

    fn system(&self) -> SystemKind {
        SystemKind::Quartic
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: [f64; 4],
    pub u: f64,
    pub hhat: f64,
    pub dhhat_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub controller: String,
    pub system: SystemKind,
    pub dt: f64,
    pub integrator: &'static str,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

fn tripped(s: &[f64; 4], u: f64) -> bool {
    !u.is_finite() || s.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_GUARD)
}

fn check_run(s0: &[f64; 4], dt: f64, t_max: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_max > 0.0) || !dt.is_finite() || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t_max > 0, got {dt}, {t_max}")));
    }
    if s0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(s0.to_vec()));
    }
    Ok((t_max / dt).round() as usize)
}

/// Fixed-step RK4 run that hands every sample to `observe`. Returns whether
/// the divergence guard tripped (the tripping sample is the last one observed).
pub fn integrate_observe(
    sys: &impl ClosedLoop,
    s0: [f64; 4],
    dt: f64,
    t_max: f64,
    mut observe: impl FnMut(&Sample),
) -> Result<bool> {
    let steps = check_run(&s0, dt, t_max)?;
    let f = |s: &[f64; 4]| sys.derivative(s, sys.control(s));
    let mut s = s0;
    for k in 0..=steps {
        let u = sys.control(&s);
        let (hhat, dhhat_dt) = sys.energy(&s);
        observe(&Sample { t: k as f64 * dt, state: s, u, hhat, dhhat_dt });
        if tripped(&s, u) {
            return Ok(true);
        }
        if k < steps {
            s = rk4_step(&f, &s, dt);
        }
    }
    Ok(false)
}

/// Integrates with classical RK4 at fixed step `dt` up to `t_max`.
pub fn integrate(sys: &impl ClosedLoop, s0: [f64; 4], dt: f64, t_max: f64) -> Result<Trajectory> {
    let steps = check_run(&s0, dt, t_max)?;
    let mut samples = Vec::with_capacity(steps + 1);
    let diverged = integrate_observe(sys, s0, dt, t_max, |smp| samples.push(*smp))?;
    Ok(Trajectory {
        samples,
        meta: TrajectoryMeta { controller: sys.id(), system: sys.system(), dt, integrator: "rk4", diverged },
    })
}

/// Final state only, without storing samples.
pub fn integrate_final(sys: &impl ClosedLoop, s0: [f64; 4], dt: f64, t_max: f64) -> Result<[f64; 4]> {
    let mut last = s0;
    integrate_observe(sys, s0, dt, t_max, |smp| last = smp.state)?;
    Ok(last)
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least the initial sample")
    }

    /// CSV with 17 significant digits. Cart columns
    /// `t,theta,theta_dot,x,x_dot,u,hhat,dhhat_dt`; quartic `t,x,y,x_dot,y_dot,u,hhat`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        match self.meta.system {
            SystemKind::Cartpole => {
                writeln!(out, "t,theta,theta_dot,x,x_dot,u,hhat,dhhat_dt")?;
                for s in &self.samples {
                    let [th, x, thd, xd] = s.state;
                    writeln!(
                        out,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        s.t, th, thd, x, xd, s.u, s.hhat, s.dhhat_dt
                    )?;
                }
            }
            SystemKind::Quartic => {
                writeln!(out, "t,x,y,x_dot,y_dot,u,hhat")?;
                for s in &self.samples {
                    let [x, y, xd, yd] = s.state;
                    writeln!(
                        out,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        s.t, x, y, xd, yd, s.u, s.hhat
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeTag {
    Settled,
    Diverged,
    Undetermined,
}

impl fmt::Display for OutcomeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeTag::Settled => "settled",
            OutcomeTag::Diverged => "diverged",
            OutcomeTag::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub tag: OutcomeTag,
    /// Present iff `tag == Settled`.
    pub settle_time: Option<f64>,
    pub max_excursion: f64,
}

impl Outcome {
    pub fn is_settled(&self) -> bool {
        self.tag == OutcomeTag::Settled
    }
}

/// Incremental classifier; feed samples in time order, then [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct SettleTracker {
    eps: f64,
    hold: f64,
    entered: Option<f64>,
    last_t: f64,
    max_excursion: f64,
}

impl SettleTracker {
    pub fn new(settle_eps: f64, hold: f64) -> Self {
        Self { eps: settle_eps, hold, entered: None, last_t: 0.0, max_excursion: 0.0 }
    }

    pub fn push(&mut self, t: f64, state: &[f64; 4]) {
        let amp = state.iter().fold(0.0_f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
        self.max_excursion = self.max_excursion.max(amp);
        if amp > self.eps {
            self.entered = None;
        } else if self.entered.is_none() {
            self.entered = Some(t);
        }
        self.last_t = t;
    }

    pub fn finish(&self, diverged: bool) -> Outcome {
        let max_excursion = self.max_excursion;
        if diverged {
            return Outcome { tag: OutcomeTag::Diverged, settle_time: None, max_excursion };
        }
        match self.entered {
            // sample times are k·dt, so allow for rounding in the window length
            Some(t0) if self.last_t - t0 >= self.hold - 1e-9 => {
                Outcome { tag: OutcomeTag::Settled, settle_time: Some(t0), max_excursion }
            }
            _ => Outcome { tag: OutcomeTag::Undetermined, settle_time: None, max_excursion },
        }
    }
}

/// Settled if every state component stays within `settle_eps` of the origin
/// over a trailing window of length `hold`; Diverged if the guard tripped.
pub fn classify(traj: &Trajectory, settle_eps: f64, hold: f64) -> Outcome {
    let mut tracker = SettleTracker::new(settle_eps, hold);
    for s in &traj.samples {
        tracker.push(s.t, &s.state);
    }
    tracker.finish(traj.meta.diverged)
}

/// Integrates and classifies without storing the trajectory.
pub fn simulate_outcome(sys: &impl ClosedLoop, s0: [f64; 4], settings: &SweepSettings) -> Result<Outcome> {
    let mut tracker = SettleTracker::new(settings.settle_eps, settings.hold);
    let diverged = integrate_observe(sys, s0, settings.dt, settings.t_max, |smp| tracker.push(smp.t, &smp.state))?;
    Ok(tracker.finish(diverged))
}

/// Energy-identity audit over the part of a cart trajectory inside the
/// positive-definite cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyAudit {
    /// `max |centered dĤ/dt - formula|`
    pub max_deviation: f64,
    /// `max_deviation / max |formula|`
    pub max_relative_deviation: f64,
    /// largest centered-difference `dĤ/dt` (≤ 0 for a Lyapunov function)
    pub max_rate: f64,
    pub max_abs_formula: f64,
    pub samples: usize,
}

pub fn energy_audit(traj: &Trajectory, ctrl: &CartpoleController) -> EnergyAudit {
    let theta_max = ctrl.validity().theta_max;
    let inside = |s: &Sample| s.state[0].abs() < theta_max;
    let dt = traj.meta.dt;
    let h: Vec<f64> = traj.samples.iter().map(|s| ctrl.hhat(&CartState::from_array(s.state))).collect();
    let mut audit =
        EnergyAudit { max_deviation: 0.0, max_relative_deviation: 0.0, max_rate: f64::NEG_INFINITY, max_abs_formula: 0.0, samples: 0 };
    for i in 1..traj.samples.len().saturating_sub(1) {
        let w = &traj.samples[i - 1..=i + 1];
        if !w.iter().all(inside) {
            continue;
        }
        let centered = (h[i + 1] - h[i - 1]) / (2.0 * dt);
        let formula = ctrl.dhhat_dt_formula(&CartState::from_array(traj.samples[i].state));
        audit.max_deviation = audit.max_deviation.max((centered - formula).abs());
        audit.max_rate = audit.max_rate.max(centered);
        audit.max_abs_formula = audit.max_abs_formula.max(formula.abs());
        audit.samples += 1;
    }
    audit.max_relative_deviation =
        if audit.max_abs_formula > 0.0 { audit.max_deviation / audit.max_abs_formula } else { audit.max_deviation };
    if audit.samples == 0 {
        audit.max_rate = 0.0;
    }
    audit
}

/// `max |Ĥ(t) - Ĥ(0)|` using the recorded `hhat` column.
pub fn hhat_drift(traj: &Trajectory) -> f64 {
    let h0 = traj.samples[0].hhat;
    traj.samples.iter().map(|s| (s.hhat - h0).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSettings {
    pub dt: f64,
    pub t_max: f64,
    pub settle_eps: f64,
    pub hold: f64,
    pub max_cells: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_max: DEFAULT_T_MAX_CART,
            settle_eps: DEFAULT_SETTLE_EPS,
            hold: DEFAULT_HOLD,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

/// Initial conditions `(θ₀, θ̇₀)` with `x₀ = ẋ₀ = 0`, θ₀-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepGrid {
    pub theta0: Axis,
    pub thetadot0: Axis,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.theta0.count * self.thetadot0.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, index: usize) -> (f64, f64) {
        let (i, j) = (index / self.thetadot0.count, index % self.thetadot0.count);
        (self.theta0.value(i), self.thetadot0.value(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerSet {
    Both,
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub index: usize,
    pub theta0: f64,
    pub thetadot0: f64,
    pub linear: Option<Outcome>,
    pub nonlinear: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TagCounts {
    pub settled: usize,
    pub diverged: usize,
    pub undetermined: usize,
    pub mean_settle_time: Option<f64>,
}

impl TagCounts {
    fn from_outcomes<'a>(it: impl Iterator<Item = &'a Outcome>) -> Self {
        let mut c = TagCounts::default();
        let mut settle_sum = 0.0;
        for o in it {
            match o.tag {
                OutcomeTag::Settled => {
                    c.settled += 1;
                    settle_sum += o.settle_time.unwrap_or(0.0);
                }
                OutcomeTag::Diverged => c.diverged += 1,
                OutcomeTag::Undetermined => c.undetermined += 1,
            }
        }
        c.mean_settle_time = (c.settled > 0).then(|| settle_sum / c.settled as f64);
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepStats {
    pub cells: usize,
    pub linear: TagCounts,
    pub nonlinear: TagCounts,
    /// cells Settled under the linear law but not under the nonlinear one
    pub containment_violations: usize,
    /// cells Settled under the nonlinear law but not under the linear one
    pub nonlinear_only: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub settings: SweepSettings,
    pub cells: Vec<SweepCell>,
}

/// Sweeps every cell of `grid` under the selected controllers.
pub fn sweep(
    grid: SweepGrid,
    settings: SweepSettings,
    nonlinear: &CartpoleController,
    linear: &LinearGains,
    set: ControllerSet,
) -> Result<SweepResult> {
    sweep_rows(grid, settings, nonlinear, linear, set, 0..grid.theta0.count)
}

/// Sweeps only the θ₀ rows in `rows`; combine parts with [`merge`].
pub fn sweep_rows(
    grid: SweepGrid,
    settings: SweepSettings,
    nonlinear: &CartpoleController,
    linear: &LinearGains,
    set: ControllerSet,
    rows: Range<usize>,
) -> Result<SweepResult> {
    if grid.len() > settings.max_cells {
        return Err(Error::InvalidArgument(format!(
            "grid has {} cells, more than the configured maximum {}",
            grid.len(),
            settings.max_cells
        )));
    }
    if rows.end > grid.theta0.count {
        return Err(Error::InvalidArgument(format!("row range {rows:?} exceeds grid")));
    }
    let per_row = grid.thetadot0.count;
    let nl_loop = CartLoop::nonlinear(*nonlinear);
    let lin_loop = CartLoop::linear(*linear, *nonlinear);
    let cells: Result<Vec<SweepCell>> = (rows.start * per_row..rows.end * per_row)
        .into_par_iter()
        .map(|index| {
            let (theta0, thetadot0) = grid.coords(index);
            let s0 = [theta0, 0.0, thetadot0, 0.0];
            let lin = match set {
                ControllerSet::Both | ControllerSet::Linear => Some(simulate_outcome(&lin_loop, s0, &settings)?),
                ControllerSet::Nonlinear => None,
            };
            let nl = match set {
                ControllerSet::Both | ControllerSet::Nonlinear => Some(simulate_outcome(&nl_loop, s0, &settings)?),
                ControllerSet::Linear => None,
            };
            Ok(SweepCell { index, theta0, thetadot0, linear: lin, nonlinear: nl })
        })
        .collect();
    Ok(SweepResult { grid, settings, cells: cells? })
}

/// Combines partial sweeps of the same grid into one result ordered by cell index.
pub fn merge(parts: Vec<SweepResult>) -> Result<SweepResult> {
    let mut it = parts.into_iter();
    let mut out = it.next().ok_or_else(|| Error::InvalidArgument("nothing to merge".into()))?;
    for p in it {
        if p.grid != out.grid || p.settings != out.settings {
            return Err(Error::InvalidArgument("cannot merge sweeps of different grids or settings".into()));
        }
        out.cells.extend(p.cells);
    }
    out.cells.sort_by_key(|c| c.index);
    if out.cells.windows(2).any(|w| w[0].index == w[1].index) {
        return Err(Error::InvalidArgument("overlapping sweep parts".into()));
    }
    Ok(out)
}

impl SweepResult {
    pub fn stats(&self) -> SweepStats {
        let both = self.cells.iter().filter_map(|c| Some((c.linear?, c.nonlinear?)));
        let containment_violations = both.clone().filter(|(l, n)| l.is_settled() && !n.is_settled()).count();
        let nonlinear_only = both.filter(|(l, n)| n.is_settled() && !l.is_settled()).count();
        SweepStats {
            cells: self.cells.len(),
            linear: TagCounts::from_outcomes(self.cells.iter().filter_map(|c| c.linear.as_ref())),
            nonlinear: TagCounts::from_outcomes(self.cells.iter().filter_map(|c| c.nonlinear.as_ref())),
            containment_violations,
            nonlinear_only,
        }
    }

    /// Cell whose initial condition is nearest to `(theta0, thetadot0)`.
    pub fn nearest(&self, theta0: f64, thetadot0: f64) -> Option<&SweepCell> {
        self.cells.iter().min_by(|a, b| {
            let da = (a.theta0 - theta0).powi(2) + (a.thetadot0 - thetadot0).powi(2);
            let db = (b.theta0 - theta0).powi(2) + (b.thetadot0 - thetadot0).powi(2);
            da.total_cmp(&db)
        })
    }

    /// CSV `theta0,thetadot0,outcome_linear,settle_linear,outcome_nonlinear,settle_nonlinear`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        fn fields(o: &Option<Outcome>) -> (String, String) {
            match o {
                Some(o) => (o.tag.to_string(), o.settle_time.map(|t| format!("{t:.16e}")).unwrap_or_default()),
                None => (String::new(), String::new()),
            }
        }
        writeln!(out, "theta0,thetadot0,outcome_linear,settle_linear,outcome_nonlinear,settle_nonlinear")?;
        for c in &self.cells {
            let (ol, sl) = fields(&c.linear);
            let (on, sn) = fields(&c.nonlinear);
            writeln!(out, "{:.16e},{:.16e},{ol},{sl},{on},{sn}", c.theta0, c.thetadot0)?;
        }
        Ok(())
    }
}
