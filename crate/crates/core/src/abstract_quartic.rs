//! A flat two-degree-of-freedom system whose linearization cannot be
//! stabilized, together with a matching controller for it.
//!
//! Plant: `g = dx² + dy²`, `V = -3/2 x⁴ + 45x²y² + 32xy³`, force on `y` only.
//! Model: `ĝ = [[2, -1], [-1, 1]]`, `V̂ = (x² - 3xy)² + (x² - 4xy - 2y²)²`,
//! `ĉ = (ẏ - ẋ) ∂/∂y`. The unactuated direction is `∂/∂x`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MetricField, ProjectionField, ScalarField, VectorField, VelocityMap};
use crate::matching::{LambdaSection, MechanicalSystem, SystemPair};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuarticState {
    pub x: f64,
    pub y: f64,
    pub x_dot: f64,
    pub y_dot: f64,
}

impl QuarticState {
    pub fn new(x: f64, y: f64, x_dot: f64, y_dot: f64) -> Self {
        Self { x, y, x_dot, y_dot }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.x_dot, self.y_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

pub fn ghat() -> Matrix2<f64> {
    Matrix2::new(2.0, -1.0, -1.0, 1.0)
}

pub fn potential_v(x: f64, y: f64) -> f64 {
    -1.5 * x.powi(4) + 45.0 * x * x * y * y + 32.0 * x * y.powi(3)
}

pub fn potential_v_gradient(x: f64, y: f64) -> [f64; 2] {
    [-6.0 * x.powi(3) + 90.0 * x * y * y + 32.0 * y.powi(3), 90.0 * x * x * y + 96.0 * x * y * y]
}

pub fn vhat_quartic(x: f64, y: f64) -> f64 {
    let a = x * x - 3.0 * x * y;
    let b = x * x - 4.0 * x * y - 2.0 * y * y;
    a * a + b * b
}

pub fn vhat_gradient(x: f64, y: f64) -> [f64; 2] {
    let a = x * x - 3.0 * x * y;
    let b = x * x - 4.0 * x * y - 2.0 * y * y;
    [
        2.0 * a * (2.0 * x - 3.0 * y) + 2.0 * b * (2.0 * x - 4.0 * y),
        2.0 * a * (-3.0 * x) + 2.0 * b * (-4.0 * x - 4.0 * y),
    ]
}

/// `u = ∂V/∂y - (V̂_x + 2V̂_y) - (ẏ - ẋ)`, the y-component of the matching force.
pub fn control_u_quartic(s: &QuarticState) -> f64 {
    let dv = potential_v_gradient(s.x, s.y);
    let dvh = vhat_gradient(s.x, s.y);
    dv[1] - (dvh[0] + 2.0 * dvh[1]) - (s.y_dot - s.x_dot)
}

/// `ẍ - 6x³ + 90xy² + 32y³ = 0`, `ÿ + 90x²y + 96xy² = u`.
pub fn dynamics_quartic(s: &QuarticState, u: f64) -> [f64; 4] {
    let dv = potential_v_gradient(s.x, s.y);
    [s.x_dot, s.y_dot, -dv[0], -dv[1] + u]
}

/// `Ĥ = ½ ĝ(v, v) + V̂`.
pub fn hhat_quartic(s: &QuarticState) -> f64 {
    let (a, b) = (s.x_dot, s.y_dot);
    0.5 * (2.0 * a * a - 2.0 * a * b + b * b) + vhat_quartic(s.x, s.y)
}

/// `dĤ/dt = -ĝ(ĉ(v), v) = -(ẏ - ẋ)²` along controlled trajectories.
pub fn hhat_rate_quartic(s: &QuarticState) -> f64 {
    -(s.y_dot - s.x_dot).powi(2)
}

pub fn blowup_time(eps: f64) -> f64 {
    1.0 / (3.0_f64.sqrt() * eps)
}

/// Open-loop solution `x = (1/ε - √3 t)⁻¹`, `y = 0`.
pub fn blowup_solution(eps: f64, t: f64) -> Result<QuarticState> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let t_blowup = blowup_time(eps);
    if t >= t_blowup {
        return Err(Error::PastBlowup { t, t_blowup });
    }
    let x = 1.0 / (1.0 / eps - 3.0_f64.sqrt() * t);
    Ok(QuarticState::new(x, 0.0, 3.0_f64.sqrt() * x * x, 0.0))
}

/// Open-loop x-equation residual of the analytic solution, using
/// `ẍ = 2√3 x ẋ` obtained by differentiating `ẋ = √3 x²`.
pub fn blowup_residual(eps: f64, t: f64) -> Result<f64> {
    let s = blowup_solution(eps, t)?;
    let x_dd = 2.0 * 3.0_f64.sqrt() * s.x * s.x_dot;
    Ok(x_dd + potential_v_gradient(s.x, s.y)[0])
}

/// Linearization at the origin, `ẍ = 0`, `ÿ = u`.
pub fn linearization() -> (Matrix4<f64>, Vector4<f64>) {
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    );
    (a, Vector4::new(0.0, 0.0, 0.0, 1.0))
}

pub fn controllability_rank() -> usize {
    let (a, b) = linearization();
    Matrix4::from_columns(&[b, a * b, a * a * b, a * a * a * b]).rank(1e-12)
}

/// The plant/model pair with `P` projecting onto `∂/∂x`.
pub fn system_pair() -> SystemPair {
    let plant_metric = MetricField::euclidean(2);
    let plant = MechanicalSystem::new(
        plant_metric.clone(),
        ScalarField::new(2, |q| potential_v(q[0], q[1]))
            .with_partials(|q| DVector::from_row_slice(&potential_v_gradient(q[0], q[1]))),
        VelocityMap::zero(2),
    );
    let gh = ghat();
    let model = MechanicalSystem::new(
        MetricField::constant(DMatrix::from_row_slice(2, 2, gh.as_slice())),
        ScalarField::new(2, |q| vhat_quartic(q[0], q[1]))
            .with_partials(|q| DVector::from_row_slice(&vhat_gradient(q[0], q[1]))),
        VelocityMap::new(2, true, |_, v| DVector::from_vec(vec![0.0, v[1] - v[0]])),
    );
    let p = ProjectionField::new(plant_metric, |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    SystemPair::new(plant, model, p).expect("quartic pair is dimensionally consistent")
}

/// `PX = ∂/∂x`, `λPX = ∂/∂x + ∂/∂y`.
pub fn lambda_section() -> LambdaSection {
    LambdaSection::new(
        VectorField::constant(DVector::from_vec(vec![1.0, 0.0])),
        VectorField::constant(DVector::from_vec(vec![1.0, 1.0])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::control_force;

    #[test]
    fn potential_examples() {
        assert_eq!(potential_v(0.0, 0.0), 0.0);
        assert_eq!(vhat_quartic(0.0, 0.0), 0.0);
        assert_eq!(potential_v(1.0, 0.0), -1.5);
        assert_eq!(vhat_quartic(1.0, 0.0), 2.0);
        assert_eq!(vhat_quartic(3.0, 1.0), 25.0);
    }

    #[test]
    fn control_examples() {
        assert_eq!(control_u_quartic(&QuarticState::default()), 0.0);
        assert_eq!(control_u_quartic(&QuarticState::new(0.0, 0.0, 1.0, 0.0)), 1.0);
        assert_eq!(vhat_gradient(1.0, 0.0), [8.0, -14.0]);
        assert_eq!(control_u_quartic(&QuarticState::new(1.0, 0.0, 0.0, 0.0)), 20.0);
    }

    #[test]
    fn closed_form_agrees_with_generic_force() {
        let sys = system_pair();
        let s = QuarticState::new(0.7, -1.3, 0.4, 2.0);
        let f = control_force(&sys, &[s.x, s.y], &DVector::from_vec(vec![s.x_dot, s.y_dot])).unwrap();
        assert!(f[0].abs() < 1e-9);
        assert!((f[1] - control_u_quartic(&s)).abs() < 1e-9);
    }

    #[test]
    fn dynamics_examples() {
        assert_eq!(dynamics_quartic(&QuarticState::default(), 0.0), [0.0; 4]);
        assert_eq!(dynamics_quartic(&QuarticState::new(1.0, 0.0, 0.0, 0.0), 0.0), [0.0, 0.0, 6.0, 0.0]);
        assert_eq!(dynamics_quartic(&QuarticState::new(0.0, 1.0, 0.0, 0.0), 0.0), [0.0, 0.0, -32.0, 0.0]);
    }

    #[test]
    fn blowup_examples() {
        let s = blowup_solution(0.1, 0.0).unwrap();
        assert!((s.x - 0.1).abs() < 1e-15);
        assert!(blowup_residual(0.1, 0.0).unwrap().abs() < 1e-15);
        assert!((blowup_time(0.1) - 5.7735).abs() < 1e-4);
        assert!(matches!(blowup_solution(0.1, 6.0), Err(Error::PastBlowup { .. })));
    }

    #[test]
    fn model_metric_positive_definite() {
        let g = ghat();
        assert_eq!(g.trace(), 3.0);
        assert!((g.determinant() - 1.0).abs() < 1e-15);
        assert!(g.symmetric_eigenvalues().iter().all(|e| *e > 0.0));
    }

    #[test]
    fn linearization_not_controllable() {
        assert_eq!(controllability_rank(), 2);
    }
}
