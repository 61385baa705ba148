//! Matching machinery: the control force that makes a plant follow a model
//! system, residuals of the matching conditions and of the linear PDEs for
//! `λ`, `ĝ` and `V̂`, and a method-of-characteristics solver for rank-one
//! projections.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel, covariant_acceleration, gradient, MetricField, ProjectionField, ScalarField, VectorField,
    VelocityMap,
};
use crate::grid::Axis;
use crate::ode::rk4_span;
use crate::quadrature::adaptive_simpson;

/// Metric, potential and dissipation of one mechanical system.
#[derive(Debug, Clone)]
pub struct MechanicalSystem {
    pub metric: MetricField,
    pub potential: ScalarField,
    pub dissipation: VelocityMap,
}

impl MechanicalSystem {
    pub fn new(metric: MetricField, potential: ScalarField, dissipation: VelocityMap) -> Self {
        Self { metric, potential, dissipation }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

/// Plant `(g, V, c)`, model `(ĝ, V̂, ĉ)` and the projection `P` onto the
/// unactuated directions.
#[derive(Debug, Clone)]
pub struct SystemPair {
    plant: MechanicalSystem,
    model: MechanicalSystem,
    projection: ProjectionField,
}

impl SystemPair {
    pub fn new(plant: MechanicalSystem, model: MechanicalSystem, projection: ProjectionField) -> Result<Self> {
        let n = plant.dim();
        for d in [
            model.dim(),
            plant.potential.dim(),
            model.potential.dim(),
            plant.dissipation.dim(),
            model.dissipation.dim(),
            projection.metric().dim(),
        ] {
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, got: d });
            }
        }
        if !plant.dissipation.is_odd() || !model.dissipation.is_odd() {
            return Err(Error::InvalidParameters("dissipation maps must be odd in velocity".into()));
        }
        Ok(Self { plant, model, projection })
    }

    pub fn plant(&self) -> &MechanicalSystem {
        &self.plant
    }

    pub fn model(&self) -> &MechanicalSystem {
        &self.model
    }

    pub fn projection(&self) -> &ProjectionField {
        &self.projection
    }

    pub fn dim(&self) -> usize {
        self.plant.dim()
    }
}

/// The force that turns plant trajectories into model trajectories:
/// `f = Γ(v,v) - Γ̂(v,v) + grad V - grad̂ V̂ + c(v) - ĉ(v)`.
pub fn control_force(sys: &SystemPair, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
    let r = split_force(sys, q, v)?;
    Ok(r.quad + r.pot + r.diss)
}

/// Velocity-quadratic, velocity-independent and odd parts of a force.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResiduals {
    pub quad: DVector<f64>,
    pub pot: DVector<f64>,
    pub diss: DVector<f64>,
}

impl MatchingResiduals {
    pub fn total(&self) -> DVector<f64> {
        &self.quad + &self.pot + &self.diss
    }

    /// Largest Euclidean norm among the three parts.
    pub fn max_norm(&self) -> f64 {
        self.quad.norm().max(self.pot.norm()).max(self.diss.norm())
    }
}

fn split_force(sys: &SystemPair, q: &[f64], v: &DVector<f64>) -> Result<MatchingResiduals> {
    let (p, m) = (&sys.plant, &sys.model);
    let quad = covariant_acceleration(&p.metric, q, v)? - covariant_acceleration(&m.metric, q, v)?;
    let pot = gradient(&p.metric, &p.potential, q)? - gradient(&m.metric, &m.potential, q)?;
    let diss = p.dissipation.eval(q, v)? - m.dissipation.eval(q, v)?;
    Ok(MatchingResiduals { quad, pot, diss })
}

/// `P` applied to each part of the control force; all three vanish exactly
/// when the matching conditions hold at `(q, v)`.
pub fn matching_residuals(sys: &SystemPair, q: &[f64], v: &DVector<f64>) -> Result<MatchingResiduals> {
    let split = split_force(sys, q, v)?;
    let p = sys.projection.matrix(q)?;
    Ok(MatchingResiduals { quad: &p * split.quad, pot: &p * split.pot, diss: &p * split.diss })
}

/// `λ` restricted to the image of a rank-one `P`: the generator `PX` and its
/// image `λPX`.
#[derive(Debug, Clone)]
pub struct LambdaSection {
    pub base: VectorField,
    pub image: VectorField,
}

impl LambdaSection {
    pub fn new(base: VectorField, image: VectorField) -> Self {
        Self { base, image }
    }
}

/// Covariant derivative `∇_Z W` of a vector field along a constant direction.
fn covariant_derivative(metric: &MetricField, field: &VectorField, q: &[f64], z: &DVector<f64>) -> Result<DVector<f64>> {
    let gamma = christoffel(metric, q)?;
    Ok(field.directional_derivative(q, z)? + gamma.contract(z, &field.eval(q)?))
}

/// `g(∇_Z λPX, PX) - g(λPX, ∇_Z PX)`.
pub fn lambda_residual(sys: &SystemPair, lam: &LambdaSection, q: &[f64], z: &DVector<f64>) -> Result<f64> {
    let g = &sys.plant.metric;
    let px = lam.base.eval(q)?;
    let lpx = lam.image.eval(q)?;
    let d_lpx = covariant_derivative(g, &lam.image, q, z)?;
    let d_px = covariant_derivative(g, &lam.base, q, z)?;
    Ok(g.inner(q, &d_lpx, &px)? - g.inner(q, &lpx, &d_px)?)
}

/// Residual of `λPX ĝ(Z,Z) + 2ĝ([Z, λPX], Z) = 2Z g(PX, Z) - 2g(PX, ∇_Z Z)`
/// for a constant direction `Z`.
pub fn ghat_residual(sys: &SystemPair, lam: &LambdaSection, q: &[f64], z: &DVector<f64>) -> Result<f64> {
    let g = &sys.plant.metric;
    let gh = &sys.model.metric;
    let px = lam.base.eval(q)?;
    let lpx = lam.image.eval(q)?;

    let dgh = gh.partials(q)?;
    let lpx_ghat_zz: f64 = (0..sys.dim()).map(|l| lpx[l] * z.dot(&(&dgh[l] * z))).sum();
    // [Z, λPX] = ∂_Z(λPX) for constant Z
    let bracket = lam.image.directional_derivative(q, z)?;
    let lhs = lpx_ghat_zz + 2.0 * gh.inner(q, &bracket, z)?;

    let dg = g.partials(q)?;
    let dg_z: DMatrix<f64> = (0..sys.dim()).fold(DMatrix::zeros(sys.dim(), sys.dim()), |acc, l| acc + &dg[l] * z[l]);
    let z_g_pxz = px.dot(&(dg_z * z)) + g.inner(q, &lam.base.directional_derivative(q, z)?, z)?;
    let nabla_zz = christoffel(g, q)?.contract(z, z);
    let rhs = 2.0 * z_g_pxz - 2.0 * g.inner(q, &px, &nabla_zz)?;
    Ok(lhs - rhs)
}

/// `dV̂(λPX) - dV(PX)`.
pub fn vhat_residual(sys: &SystemPair, lam: &LambdaSection, q: &[f64]) -> Result<f64> {
    let dvh = sys.model.potential.differential(q)?;
    let dv = sys.plant.potential.differential(q)?;
    Ok(dvh.dot(&lam.image.eval(q)?) - dv.dot(&lam.base.eval(q)?))
}

/// `λ = ĝ⁻¹ g` at `q`.
pub fn extend_lambda(ghat: &MetricField, g: &MetricField, q: &[f64]) -> Result<DMatrix<f64>> {
    let model = ghat.at(q)?;
    Ok(model.inv * g.components(q)?)
}

type Fn1 = dyn Fn(f64) -> f64 + Send + Sync;

/// Absolute tolerance of the quadrature behind [`GeneralCartLambda::mu`].
pub const LAMBDA_QUAD_TOL: f64 = 1e-10;

/// General solution of the λ-equation for the cart metric: `σ = σ(θ)` and
/// `μ = μ₀ cos θ - (1/b) cos θ ∫₀^θ σ'(s) sec²(s) ds`.
///
/// μ depends on θ only; x-dependence is admissible only where `sin θ = 0`.
#[derive(Clone)]
pub struct GeneralCartLambda {
    sigma: Arc<Fn1>,
    dsigma: Arc<Fn1>,
    mu0: f64,
    b: f64,
}

impl std::fmt::Debug for GeneralCartLambda {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralCartLambda").field("mu0", &self.mu0).field("b", &self.b).finish()
    }
}

/// Builds the general cart λ from `σ` and its derivative.
pub fn lambda_general_cart(
    sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    dsigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    mu0: f64,
    b: f64,
) -> GeneralCartLambda {
    GeneralCartLambda { sigma: Arc::new(sigma), dsigma: Arc::new(dsigma), mu0, b }
}

impl GeneralCartLambda {
    pub fn sigma(&self, theta: f64) -> f64 {
        (self.sigma)(theta)
    }

    pub fn dsigma(&self, theta: f64) -> f64 {
        (self.dsigma)(theta)
    }

    /// `∫₀^θ σ'(s) sec²(s) ds`.
    pub fn integral(&self, theta: f64) -> Result<f64> {
        let ds = self.dsigma.clone();
        adaptive_simpson(&move |s: f64| ds(s) / s.cos().powi(2), 0.0, theta, LAMBDA_QUAD_TOL)
    }

    pub fn mu(&self, theta: f64) -> Result<f64> {
        Ok(theta.cos() * (self.mu0 - self.integral(theta)? / self.b))
    }

    pub fn dmu(&self, theta: f64) -> Result<f64> {
        Ok(-theta.sin() * (self.mu0 - self.integral(theta)? / self.b) - self.dsigma(theta) / (self.b * theta.cos()))
    }

    /// The section `λ(∂/∂θ) = σ ∂/∂θ + μ ∂/∂x` with analytic Jacobian.
    /// Quadrature failures surface as NaN components.
    pub fn section(&self) -> LambdaSection {
        let me = self.clone();
        let me2 = self.clone();
        let image = VectorField::new(2, move |q| {
            DVector::from_vec(vec![me.sigma(q[0]), me.mu(q[0]).unwrap_or(f64::NAN)])
        })
        .with_jacobian(move |q| {
            DMatrix::from_row_slice(2, 2, &[me2.dsigma(q[0]), 0.0, me2.dmu(q[0]).unwrap_or(f64::NAN), 0.0])
        });
        LambdaSection::new(VectorField::constant(DVector::from_vec(vec![1.0, 0.0])), image)
    }
}

/// How `σ` varies along the cart characteristics.
#[derive(Clone, Debug)]
pub enum SigmaProfile {
    Constant(f64),
    General(GeneralCartLambda),
}

/// Initial data on the surface `θ = 0` for the cart `ĝ`/`V̂` equations.
#[derive(Clone)]
pub struct CharacteristicData {
    pub sigma: SigmaProfile,
    pub mu0: f64,
    /// `ĝ₁₁(0, x)`
    pub h: Arc<Fn1>,
    /// `V̂(0, x)`
    pub w: Arc<Fn1>,
    /// Characteristics must stay within `|θ| < theta_limit`.
    pub theta_limit: f64,
}

impl std::fmt::Debug for CharacteristicData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CharacteristicData")
            .field("sigma", &self.sigma)
            .field("mu0", &self.mu0)
            .field("theta_limit", &self.theta_limit)
            .finish()
    }
}

/// Default flow-time step for characteristic integration.
pub const CHARACTERISTIC_DT: f64 = 1e-3;

impl CharacteristicData {
    pub fn constant(
        sigma0: f64,
        mu0: f64,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            sigma: SigmaProfile::Constant(sigma0),
            mu0,
            h: Arc::new(h),
            w: Arc::new(w),
            theta_limit: std::f64::consts::FRAC_PI_2 - 1e-3,
        }
    }

    fn sigma_at(&self, theta: f64) -> f64 {
        match &self.sigma {
            SigmaProfile::Constant(s) => *s,
            SigmaProfile::General(l) => l.sigma(theta),
        }
    }

    /// Flow time from the surface to the level set `θ`.
    fn flow_time(&self, theta: f64) -> Result<f64> {
        match &self.sigma {
            SigmaProfile::Constant(s) => Ok(theta / s),
            SigmaProfile::General(l) => {
                let l = l.clone();
                adaptive_simpson(&move |s: f64| 1.0 / l.sigma(s), 0.0, theta, 1e-12)
            }
        }
    }

    /// Right-hand side along the flow of `λPX`; state is `(θ, I, x, ĝ₁₁, V̂)`
    /// with `I = ∫ σ' sec²` carried along so μ needs no quadrature.
    fn flow(&self, b: f64) -> impl Fn(&[f64; 5]) -> [f64; 5] + '_ {
        move |y: &[f64; 5]| {
            let (th, integral, g11) = (y[0], y[1], y[3]);
            let (s, c) = th.sin_cos();
            let (sigma, dsigma) = match &self.sigma {
                SigmaProfile::Constant(s0) => (*s0, 0.0),
                SigmaProfile::General(l) => (l.sigma(th), l.dsigma(th)),
            };
            let amp = self.mu0 - integral / b;
            let mu = c * amp;
            let dmu = -s * amp - dsigma / (b * c);
            [
                sigma,
                dsigma / (c * c) * sigma,
                mu,
                -2.0 * dsigma * g11 - 2.0 * dmu * (1.0 - sigma * g11) / mu,
                -s,
            ]
        }
    }
}

/// One solved grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicCell {
    pub theta: f64,
    pub x: f64,
    pub ghat11: f64,
    pub ghat12: f64,
    pub ghat22: f64,
    pub vhat: f64,
    /// components of `λ(∂/∂θ)`
    pub sigma: f64,
    pub mu: f64,
}

impl CharacteristicCell {
    pub fn ghat(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.ghat11, self.ghat12, self.ghat12, self.ghat22])
    }
}

/// Solved `ĝ`, `V̂` and `λPX` on a rectangular `(θ, x)` grid, θ-major.
#[derive(Debug, Clone)]
pub struct CharacteristicSolution {
    pub theta_axis: Axis,
    pub x_axis: Axis,
    pub cells: Vec<CharacteristicCell>,
    /// Largest Richardson error estimate `|y(Δt) - y(2Δt)| / 15` over the grid.
    pub richardson_max: f64,
}

impl CharacteristicSolution {
    pub fn cell(&self, i_theta: usize, i_x: usize) -> &CharacteristicCell {
        &self.cells[i_theta * self.x_axis.count + i_x]
    }

    /// CSV with header `theta,x,ghat11,ghat12,ghat22,vhat`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "theta,x,ghat11,ghat12,ghat22,vhat")?;
        for c in &self.cells {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c.theta, c.x, c.ghat11, c.ghat12, c.ghat22, c.vhat
            )?;
        }
        Ok(())
    }
}

/// Propagates `ĝ₁₁` and `V̂` from `θ = 0` along the flow of `λPX` for the
/// cart metric with coupling `b`, then completes `ĝ₁₂`, `ĝ₂₂` from
/// `ĝλ(∂/∂θ) = g(∂/∂θ, ·)`.
pub fn solve_characteristics(data: &CharacteristicData, b: f64, theta_axis: Axis, x_axis: Axis) -> Result<CharacteristicSolution> {
    solve_characteristics_with_step(data, b, theta_axis, x_axis, CHARACTERISTIC_DT)
}

pub fn solve_characteristics_with_step(
    data: &CharacteristicData,
    b: f64,
    theta_axis: Axis,
    x_axis: Axis,
    dt: f64,
) -> Result<CharacteristicSolution> {
    if data.sigma_at(0.0) == 0.0 || !data.sigma_at(0.0).is_finite() {
        return Err(Error::InvalidParameters("sigma(0) must be nonzero (noncharacteristic surface)".into()));
    }
    if !(b > 0.0 && b < 1.0) || data.mu0 == 0.0 || !(dt > 0.0) {
        return Err(Error::InvalidParameters("need b in (0,1), mu0 != 0, dt > 0".into()));
    }
    let f = data.flow(b);
    let mut cells = Vec::with_capacity(theta_axis.count * x_axis.count);
    let mut richardson_max = 0.0_f64;
    for theta in theta_axis.values() {
        let escape = |x| Error::CharacteristicEscape { theta, x };
        if theta.abs() >= data.theta_limit {
            return Err(escape(x_axis.lo));
        }
        let t_end = data.flow_time(theta).map_err(|_| escape(x_axis.lo))?;
        if !t_end.is_finite() {
            return Err(escape(x_axis.lo));
        }
        let n = ((t_end.abs() / dt).ceil() as usize).max(2);
        let n = n + n % 2;
        // Offset of the characteristic from its foot; independent of the foot itself.
        let shift = rk4_span(&f, [0.0, 0.0, 0.0, 0.0, 0.0], t_end, n);
        if (shift[0] - theta).abs() > 1e-8 {
            return Err(escape(x_axis.lo));
        }
        for x in x_axis.values() {
            let foot = x - shift[2];
            let y0 = [0.0, 0.0, foot, (data.h)(foot), (data.w)(foot)];
            let fine = rk4_span(&f, y0, t_end, n);
            let coarse = rk4_span(&f, y0, t_end, n / 2);
            let est = fine.iter().zip(coarse.iter()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max) / 15.0;
            richardson_max = richardson_max.max(est);
            if fine.iter().any(|v| !v.is_finite()) {
                return Err(escape(x));
            }
            let (th, integral) = (fine[0], fine[1]);
            let sigma = data.sigma_at(th);
            let mu = th.cos() * (data.mu0 - integral / b);
            let g11 = fine[3];
            let g12 = (1.0 - sigma * g11) / mu;
            let g22 = (b * th.cos() - sigma * g12) / mu;
            cells.push(CharacteristicCell { theta, x, ghat11: g11, ghat12: g12, ghat22: g22, vhat: fine[4], sigma, mu });
        }
    }
    Ok(CharacteristicSolution { theta_axis, x_axis, cells, richardson_max })
}
