//! The inverted-pendulum cart in scaled coordinates and its closed-form
//! energy-shaping controller family.
//!
//! Chart ordering is `(θ, x)` with `θ = 0` upright. The scaled plant has
//! metric `g = dθ² + 2b cos θ dθ dx + dx²` and potential `V = cos θ`; the
//! control `u` enters the x-equation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MetricField, ProjectionField, ScalarField, VectorField, VelocityMap};
use crate::matching::{CharacteristicData, LambdaSection, MechanicalSystem, SystemPair};

pub const DEFAULT_B: f64 = 0.188;
pub const DEFAULT_SIGMA0: f64 = -0.05;
pub const DEFAULT_MU0: f64 = 10.0;
pub const DEFAULT_R: f64 = 1000.0;
pub const DEFAULT_W1: f64 = 1.5;

/// `|det ĝ|` below this makes the closed-form control law undefined.
pub const DEGENERATE_DET: f64 = 1e-12;

/// Physical cart parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalCart {
    /// base mass (kg)
    #[serde(rename = "M")]
    pub base_mass: f64,
    /// pendulum mass (kg)
    #[serde(rename = "m")]
    pub pendulum_mass: f64,
    /// hinge to centre of mass (m)
    #[serde(rename = "l")]
    pub length: f64,
    /// moment of inertia about the centre of mass (kg m²)
    #[serde(rename = "I")]
    pub inertia: f64,
    /// gravitational acceleration (m/s²)
    #[serde(rename = "g", default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    9.81
}

impl PhysicalCart {
    /// The laboratory cart.
    pub fn lab() -> Self {
        Self { base_mass: 5.02, pendulum_mass: 0.454, length: 0.425, inertia: 0.11, gravity: 9.81 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.base_mass > 0.0
            && self.pendulum_mass > 0.0
            && self.length > 0.0
            && self.inertia >= 0.0
            && self.gravity > 0.0
            && [self.base_mass, self.pendulum_mass, self.length, self.inertia, self.gravity]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!("physical cart parameters out of range: {self:?}")))
        }
    }

    /// Seconds per unit of scaled time, `sqrt((mℓ² + I) / (m g ℓ))`.
    pub fn time_scale(&self) -> f64 {
        let m = self.pendulum_mass;
        ((m * self.length * self.length + self.inertia) / (m * self.gravity * self.length)).sqrt()
    }
}

/// `b = mℓ (M+m)^(-1/2) (mℓ² + I)^(-1/2)`.
pub fn nondimensionalize(p: &PhysicalCart) -> Result<f64> {
    let b = coupling(p);
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidParameters(format!("coupling b = {b} is outside (0, 1)")));
    }
    p.validate()?;
    Ok(b)
}

fn coupling(p: &PhysicalCart) -> f64 {
    let (mm, m, l, i) = (p.base_mass, p.pendulum_mass, p.length, p.inertia);
    m * l / ((mm + m).sqrt() * (m * l * l + i).sqrt())
}

/// Positive damping-gain function `Φ(θ, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// `const:c`
    Const(f64),
    /// `poly:c0,c1,c2` meaning `c0 + c1 θ² + c2 x²`
    Poly { c0: f64, c_theta2: f64, c_x2: f64 },
}

impl Phi {
    pub fn eval(&self, theta: f64, x: f64) -> f64 {
        match *self {
            Phi::Const(c) => c,
            Phi::Poly { c0, c_theta2, c_x2 } => c0 + c_theta2 * theta * theta + c_x2 * x * x,
        }
    }

    pub fn is_positive(&self) -> bool {
        match *self {
            Phi::Const(c) => c > 0.0 && c.is_finite(),
            Phi::Poly { c0, c_theta2, c_x2 } => {
                c0 > 0.0 && c_theta2 >= 0.0 && c_x2 >= 0.0 && [c0, c_theta2, c_x2].iter().all(|v| v.is_finite())
            }
        }
    }
}

impl Default for Phi {
    fn default() -> Self {
        Phi::Const(1.0)
    }
}

impl FromStr for Phi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameters(format!("unrecognised phi {s:?}; use const:c or poly:c0,c1,c2"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let phi = match (kind.trim(), nums.as_slice()) {
            ("const", [c]) => Phi::Const(*c),
            ("poly", [c0, c1, c2]) => Phi::Poly { c0: *c0, c_theta2: *c1, c_x2: *c2 },
            _ => return Err(bad()),
        };
        if !phi.is_positive() {
            return Err(Error::InvalidParameters(format!("phi {s:?} is not strictly positive")));
        }
        Ok(phi)
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Const(c) => write!(f, "const:{c}"),
            Phi::Poly { c0, c_theta2, c_x2 } => write!(f, "poly:{c0},{c_theta2},{c_x2}"),
        }
    }
}

/// Cart state in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartState {
    pub theta: f64,
    pub x: f64,
    pub theta_dot: f64,
    pub x_dot: f64,
}

impl CartState {
    pub fn new(theta: f64, x: f64, theta_dot: f64, x_dot: f64) -> Self {
        Self { theta, x, theta_dot, x_dot }
    }

    /// `[θ, x, θ̇, ẋ]`
    pub fn to_array(self) -> [f64; 4] {
        [self.theta, self.x, self.theta_dot, self.x_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Region report for the model metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validity {
    pub ok: bool,
    /// `ĝ` is positive definite exactly where `cos²θ > cos2_bound`.
    pub cos2_bound: f64,
    pub theta_max: f64,
}

/// Parameters of the closed-form controller family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleController {
    pub b: f64,
    pub sigma0: f64,
    pub mu0: f64,
    pub r: f64,
    pub w1: f64,
    pub phi: Phi,
}

impl CartpoleController {
    /// Checked constructor: `b ∈ (0,1)`, the sign and cone conditions, `Φ > 0`.
    pub fn new(b: f64, sigma0: f64, mu0: f64, r: f64, w1: f64, phi: Phi) -> Result<Self> {
        let c = Self { b, sigma0, mu0, r, w1, phi };
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParameters(format!("b = {b} is outside (0, 1)")));
        }
        if !c.validity().ok {
            return Err(Error::InvalidParameters(format!(
                "controller constants violate mu0 > 0, sigma0 < 0, w1 > 0, r > 0, cone bound < 1: {c:?}"
            )));
        }
        if !phi.is_positive() {
            return Err(Error::InvalidParameters(format!("phi {phi} is not strictly positive")));
        }
        Ok(c)
    }

    /// The published constants with `b = 0.188` and `Φ = 1`.
    pub fn reference() -> Self {
        Self { b: DEFAULT_B, sigma0: DEFAULT_SIGMA0, mu0: DEFAULT_MU0, r: DEFAULT_R, w1: DEFAULT_W1, phi: Phi::Const(1.0) }
    }

    /// The conservative member of the family (`ĉ ≡ 0`, i.e. `Φ ≡ 0`).
    pub fn conservative(&self) -> Self {
        Self { phi: Phi::Const(0.0), ..*self }
    }

    pub fn validity(&self) -> Validity {
        let (b, s0, m0, r) = (self.b, self.sigma0, self.mu0, self.r);
        let cos2_bound = (s0 * s0 * r + b * m0) / (-s0 * b * m0 * r);
        let ok = m0 > 0.0 && s0 < 0.0 && self.w1 > 0.0 && r > 0.0 && cos2_bound.is_finite() && cos2_bound < 1.0;
        let theta_max = if cos2_bound.is_nan() || cos2_bound >= 1.0 {
            0.0
        } else if cos2_bound <= 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            cos2_bound.sqrt().acos()
        };
        Validity { ok, cos2_bound, theta_max }
    }

    /// Whether `θ` lies inside the cone where `ĝ` is positive definite.
    pub fn in_cone(&self, theta: f64) -> bool {
        theta.cos().powi(2) > self.validity().cos2_bound
    }

    pub fn ghat(&self, theta: f64) -> Matrix2<f64> {
        let c = theta.cos();
        let (b, s0, m0, r) = (self.b, self.sigma0, self.mu0, self.r);
        let g11 = 1.0 / s0 + r * c * c;
        let g12 = -(s0 / m0) * r * c;
        let g22 = b / m0 + s0 * s0 * r / (m0 * m0);
        Matrix2::new(g11, g12, g12, g22)
    }

    /// `det ĝ = b/(σ₀μ₀) + (br/μ₀) cos²θ + σ₀r/μ₀²`.
    pub fn det_ghat(&self, theta: f64) -> f64 {
        let c = theta.cos();
        let (b, s0, m0, r) = (self.b, self.sigma0, self.mu0, self.r);
        b / (s0 * m0) + b * r / m0 * c * c + s0 * r / (m0 * m0)
    }

    pub fn vhat(&self, theta: f64, x: f64) -> f64 {
        let z = x - self.mu0 / self.sigma0 * theta.sin();
        (theta.cos() - 1.0) / self.sigma0 + 0.5 * self.w1 * z * z
    }

    /// `(∂V̂/∂θ, ∂V̂/∂x)`.
    pub fn vhat_gradient(&self, theta: f64, x: f64) -> [f64; 2] {
        let ratio = self.mu0 / self.sigma0;
        let z = x - ratio * theta.sin();
        [-theta.sin() / self.sigma0 - self.w1 * z * ratio * theta.cos(), self.w1 * z]
    }

    pub fn vhat_hessian_origin(&self) -> Matrix2<f64> {
        let w2 = self.w1;
        let ratio = self.mu0 / self.sigma0;
        Matrix2::new(ratio * ratio * w2 - 1.0 / self.sigma0, -ratio * w2, -ratio * w2, w2)
    }

    /// Closed-form control law.
    pub fn control_u(&self, s: &CartState) -> Result<f64> {
        let (sn, c) = s.theta.sin_cos();
        let det_gh = self.det_ghat(s.theta);
        if det_gh.abs() < DEGENERATE_DET {
            return Err(Error::DegenerateModelMetric { theta: s.theta, det: det_gh });
        }
        let (b, s0, m0) = (self.b, self.sigma0, self.mu0);
        let det_g = 1.0 - b * b * c * c;
        let shaping = (b + self.r * det_g / (m0 * det_gh)) * (c * sn - sn * s.theta_dot * s.theta_dot);
        let potential = self.w1 * det_g / (s0 * det_gh) * (s.x - m0 / s0 * sn);
        let damping = det_g * self.phi.eval(s.theta, s.x) * (m0 * c * s.theta_dot - s0 * s.x_dot);
        Ok(shaping - potential + damping)
    }

    /// Controlled energy `½ ĝ(v, v) + V̂`.
    pub fn hhat(&self, s: &CartState) -> f64 {
        let gh = self.ghat(s.theta);
        let (a, v) = (s.theta_dot, s.x_dot);
        0.5 * (gh[(0, 0)] * a * a + 2.0 * gh[(0, 1)] * a * v + gh[(1, 1)] * v * v) + self.vhat(s.theta, s.x)
    }

    /// `dĤ/dt = -det ĝ · Φ · (μ₀ cos θ θ̇ - σ₀ ẋ)²` along closed-loop trajectories.
    pub fn dhhat_dt_formula(&self, s: &CartState) -> f64 {
        let k = self.mu0 * s.theta.cos() * s.theta_dot - self.sigma0 * s.x_dot;
        -self.det_ghat(s.theta) * self.phi.eval(s.theta, s.x) * k * k
    }

    /// Time derivative of the state under this controller.
    pub fn closed_loop(&self, s: &CartState) -> Result<[f64; 4]> {
        Ok(dynamics(self.b, s, self.control_u(s)?))
    }

    /// Plant and model as generic geometric objects, with `ĝ` restricted to
    /// the positive-definite cone.
    pub fn system_pair(&self) -> Result<SystemPair> {
        let plant_metric = cart_metric(self.b);
        let plant = MechanicalSystem::new(
            plant_metric.clone(),
            ScalarField::new(2, |q| q[0].cos()).with_partials(|q| DVector::from_vec(vec![-q[0].sin(), 0.0])),
            VelocityMap::zero(2),
        );
        let ctrl = *self;
        let ctrl_d = *self;
        let ctrl_r = *self;
        let model_metric = MetricField::new(2, move |q| {
            let m = ctrl.ghat(q[0]);
            DMatrix::from_row_slice(2, 2, m.as_slice())
        })
        .with_partials(move |q| {
            let (s, c) = q[0].sin_cos();
            let d11 = -2.0 * ctrl_d.r * c * s;
            let d12 = ctrl_d.sigma0 / ctrl_d.mu0 * ctrl_d.r * s;
            vec![DMatrix::from_row_slice(2, 2, &[d11, d12, d12, 0.0]), DMatrix::zeros(2, 2)]
        })
        .with_region(move |q| ctrl_r.in_cone(q[0]));
        let ctrl_v = *self;
        let ctrl_g = *self;
        let model_potential = ScalarField::new(2, move |q| ctrl_v.vhat(q[0], q[1]))
            .with_partials(move |q| DVector::from_row_slice(&ctrl_g.vhat_gradient(q[0], q[1])));
        let ctrl_c = *self;
        let model_dissipation = VelocityMap::new(2, true, move |q, v| {
            let c = q[0].cos();
            let k = ctrl_c.phi.eval(q[0], q[1]) * (ctrl_c.mu0 * c * v[0] - ctrl_c.sigma0 * v[1]);
            DVector::from_vec(vec![k * ctrl_c.b * c, -k])
        });
        let model = MechanicalSystem::new(model_metric, model_potential, model_dissipation);
        SystemPair::new(plant, model, cart_projection(self.b, plant_metric))
    }

    /// `PX = ∂/∂θ` and `λPX = σ₀ ∂/∂θ + μ₀ cos θ ∂/∂x`.
    pub fn lambda_section(&self) -> LambdaSection {
        let (s0, m0) = (self.sigma0, self.mu0);
        let image = VectorField::new(2, move |q| DVector::from_vec(vec![s0, m0 * q[0].cos()]))
            .with_jacobian(move |q| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -m0 * q[0].sin(), 0.0]));
        LambdaSection::new(VectorField::constant(DVector::from_vec(vec![1.0, 0.0])), image)
    }

    /// Data on `θ = 0` whose characteristic solution is this controller's
    /// `ĝ₁₁` and `V̂`: `ĝ₁₁(0, x) = 1/σ₀ + r`, `V̂(0, x) = ½ w₁ x²`.
    pub fn characteristic_data(&self) -> CharacteristicData {
        let (h0, w1) = (1.0 / self.sigma0 + self.r, self.w1);
        CharacteristicData::constant(self.sigma0, self.mu0, move |_| h0, move |x| 0.5 * w1 * x * x)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<ControllerParams>(s)?.into_controller()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Scaled plant metric with analytic partials.
pub fn cart_metric(b: f64) -> MetricField {
    MetricField::new(2, move |q| {
        let c = q[0].cos();
        DMatrix::from_row_slice(2, 2, &[1.0, b * c, b * c, 1.0])
    })
    .with_partials(move |q| {
        let d = -b * q[0].sin();
        vec![DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]), DMatrix::zeros(2, 2)]
    })
}

/// `P = (b cos θ dx + dθ) ⊗ ∂/∂θ`.
pub fn cart_projection(b: f64, metric: MetricField) -> ProjectionField {
    ProjectionField::new(metric, move |q| DMatrix::from_row_slice(2, 2, &[1.0, b * q[0].cos(), 0.0, 0.0]))
}

/// State derivative of the scaled cart with input `u` on the x-equation:
/// `θ̈ + b cos θ ẍ - sin θ = 0`, `b cos θ θ̈ + ẍ - b sin θ θ̇² = u`.
pub fn dynamics(b: f64, s: &CartState, u: f64) -> [f64; 4] {
    let (sn, c) = s.theta.sin_cos();
    let rhs_theta = sn;
    let rhs_x = u + b * sn * s.theta_dot * s.theta_dot;
    let det = 1.0 - b * b * c * c;
    let theta_dd = (rhs_theta - b * c * rhs_x) / det;
    let x_dd = (rhs_x - b * c * rhs_theta) / det;
    [s.theta_dot, s.x_dot, theta_dd, x_dd]
}

/// Open-loop energy `½ g(v, v) + cos θ`.
pub fn open_loop_energy(b: f64, s: &CartState) -> f64 {
    let (a, v) = (s.theta_dot, s.x_dot);
    0.5 * (a * a + 2.0 * b * s.theta.cos() * a * v + v * v) + s.theta.cos()
}

/// JSON document accepted by [`CartpoleController::from_json_str`].
/// Missing constants default to the published ones.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalCart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
}

impl ControllerParams {
    pub fn into_controller(self) -> Result<CartpoleController> {
        let b = match (self.b, self.physical) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameters("give either \"b\" or \"physical\", not both".into()))
            }
            (Some(b), None) => b,
            (None, Some(p)) => nondimensionalize(&p)?,
            (None, None) => DEFAULT_B,
        };
        let phi = match self.phi {
            Some(s) => s.parse()?,
            None => Phi::default(),
        };
        CartpoleController::new(
            b,
            self.sigma0.unwrap_or(DEFAULT_SIGMA0),
            self.mu0.unwrap_or(DEFAULT_MU0),
            self.r.unwrap_or(DEFAULT_R),
            self.w1.unwrap_or(DEFAULT_W1),
            phi,
        )
    }
}
