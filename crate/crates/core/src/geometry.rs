//! Numerical Riemannian geometry on a single n-dimensional chart.
//!
//! Metrics, potentials and vector fields are closures over chart points with
//! optional analytic derivatives; without them, central differences with step
//! [`FD_STEP`] are used. Tangent vectors are `DVector<f64>` in chart
//! coordinates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Central-difference step used when no analytic derivative is supplied.
pub const FD_STEP: f64 = 1e-5;

/// Default lower bound on `|det g|` below which a metric is treated as singular.
pub const DEFAULT_DET_MARGIN: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-12;

type MatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type MatrixListFn = dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type RegionFn = dyn Fn(&[f64]) -> bool + Send + Sync;
type FiberFn = dyn Fn(&[f64], &DVector<f64>) -> DVector<f64> + Send + Sync;

fn shifted(q: &[f64], l: usize, h: f64) -> Vec<f64> {
    let mut p = q.to_vec();
    p[l] += h;
    p
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// A symmetric positive-definite (or at least non-degenerate) metric field.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    components: Arc<MatrixFn>,
    partials: Option<Arc<MatrixListFn>>,
    fd_step: f64,
    region: Option<Arc<RegionFn>>,
    det_margin: f64,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("analytic_partials", &self.partials.is_some())
            .field("fd_step", &self.fd_step)
            .field("has_region", &self.region.is_some())
            .field("det_margin", &self.det_margin)
            .finish()
    }
}

/// Metric data evaluated at one point.
#[derive(Debug, Clone)]
pub struct MetricAt {
    pub g: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub det: f64,
}

impl MetricField {
    /// Metric with finite-difference partials, valid everywhere.
    pub fn new(dim: usize, components: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            components: Arc::new(components),
            partials: None,
            fd_step: FD_STEP,
            region: None,
            det_margin: DEFAULT_DET_MARGIN,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::constant(DMatrix::identity(dim, dim))
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let zeros = vec![DMatrix::zeros(dim, dim); dim];
        Self::new(dim, move |_| m.clone()).with_partials(move |_| zeros.clone())
    }

    /// Supplies analytic partials: element `l` of the returned list is `∂_l g`.
    pub fn with_partials(
        mut self,
        partials: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Restricts the metric to a region; evaluation outside it is refused.
    pub fn with_region(mut self, region: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.region = Some(Arc::new(region));
        self
    }

    pub fn with_det_margin(mut self, margin: f64) -> Self {
        self.det_margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn det_margin(&self) -> f64 {
        self.det_margin
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn in_region(&self, q: &[f64]) -> bool {
        self.region.as_ref().is_none_or(|r| r(q))
    }

    /// Raw components, checked for shape and symmetry.
    pub fn components(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim, q.len())?;
        let g = (self.components)(q);
        check_dim(self.dim, g.nrows())?;
        check_dim(self.dim, g.ncols())?;
        let scale = g.amax().max(1.0);
        let asym = (&g - g.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::AsymmetricMetric { q: q.to_vec(), asym });
        }
        Ok(g)
    }

    /// Components, inverse and determinant; refuses points outside the
    /// region or where the determinant is inside the margin.
    pub fn at(&self, q: &[f64]) -> Result<MetricAt> {
        let g = self.components(q)?;
        if !self.in_region(q) {
            return Err(Error::OutsideRegion { q: q.to_vec() });
        }
        let det = g.determinant();
        if !det.is_finite() || det.abs() < self.det_margin {
            return Err(Error::SingularMetric { q: q.to_vec(), det, margin: self.det_margin });
        }
        let inv = g.clone().try_inverse().ok_or_else(|| Error::SingularMetric {
            q: q.to_vec(),
            det,
            margin: self.det_margin,
        })?;
        Ok(MetricAt { g, inv, det })
    }

    /// `∂_l g` for each coordinate `l`, analytic when available.
    pub fn partials(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        check_dim(self.dim, q.len())?;
        match &self.partials {
            Some(p) => {
                let d = p(q);
                check_dim(self.dim, d.len())?;
                Ok(d)
            }
            None => self.fd_partials(q, self.fd_step),
        }
    }

    /// Central-difference partials regardless of whether analytic ones exist.
    pub fn fd_partials(&self, q: &[f64], h: f64) -> Result<Vec<DMatrix<f64>>> {
        (0..self.dim)
            .map(|l| {
                let plus = self.components(&shifted(q, l, h))?;
                let minus = self.components(&shifted(q, l, -h))?;
                Ok((plus - minus) / (2.0 * h))
            })
            .collect()
    }

    pub fn inner(&self, q: &[f64], a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let g = self.components(q)?;
        Ok(a.dot(&(g * b)))
    }
}

/// A scalar potential with optional analytic differential.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: Arc<ScalarFn>,
    differential: Option<Arc<VectorFn>>,
    fd_step: f64,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic_partials", &self.differential.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, value: Arc::new(value), differential: None, fd_step: FD_STEP }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_| 0.0).with_partials(move |_| DVector::zeros(dim))
    }

    /// Analytic partials `∂V/∂x^i` as a coordinate vector.
    pub fn with_partials(mut self, d: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.differential = Some(Arc::new(d));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    pub fn differential(&self, q: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim, q.len())?;
        match &self.differential {
            Some(d) => {
                let v = d(q);
                check_dim(self.dim, v.len())?;
                Ok(v)
            }
            None => Ok(self.fd_differential(q, self.fd_step)),
        }
    }

    pub fn fd_differential(&self, q: &[f64], h: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|l| {
                (self.value(&shifted(q, l, h)) - self.value(&shifted(q, l, -h))) / (2.0 * h)
            }),
        )
    }
}

/// A fiber-preserving map `(q, v) -> tangent vector`.
#[derive(Clone)]
pub struct VelocityMap {
    dim: usize,
    map: Arc<FiberFn>,
    odd: bool,
}

impl fmt::Debug for VelocityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VelocityMap").field("dim", &self.dim).field("odd", &self.odd).finish()
    }
}

impl VelocityMap {
    pub fn new(
        dim: usize,
        odd: bool,
        map: impl Fn(&[f64], &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, map: Arc::new(map), odd }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, true, move |_, _| DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }

    pub fn eval(&self, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, q.len())?;
        check_dim(self.dim, v.len())?;
        Ok((self.map)(q, v))
    }

    /// `|map(q, -v) + map(q, v)|_∞`.
    pub fn odd_residual(&self, q: &[f64], v: &DVector<f64>) -> Result<f64> {
        Ok((self.eval(q, &-v)? + self.eval(q, v)?).amax())
    }
}

/// A vector field with optional analytic Jacobian (`jac[(i, j)] = ∂_j W^i`).
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    value: Arc<VectorFn>,
    jacobian: Option<Arc<MatrixFn>>,
    fd_step: f64,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { dim, value: Arc::new(value), jacobian: None, fd_step: FD_STEP }
    }

    pub fn constant(v: DVector<f64>) -> Self {
        let dim = v.len();
        Self::new(dim, move |_| v.clone()).with_jacobian(move |_| DMatrix::zeros(dim, dim))
    }

    pub fn with_jacobian(mut self, j: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, q: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim, q.len())?;
        let v = (self.value)(q);
        check_dim(self.dim, v.len())?;
        Ok(v)
    }

    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim, q.len())?;
        if let Some(j) = &self.jacobian {
            return Ok(j(q));
        }
        let h = self.fd_step;
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        for l in 0..self.dim {
            let col = (self.eval(&shifted(q, l, h))? - self.eval(&shifted(q, l, -h))?) / (2.0 * h);
            jac.set_column(l, &col);
        }
        Ok(jac)
    }

    /// Componentwise derivative `∂_Z W` along a constant direction `Z`.
    pub fn directional_derivative(&self, q: &[f64], z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.jacobian(q)? * z)
    }
}

/// A g-orthogonal projection field `P`.
#[derive(Clone)]
pub struct ProjectionField {
    matrix: Arc<MatrixFn>,
    metric: MetricField,
}

impl fmt::Debug for ProjectionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectionField").field("metric", &self.metric).finish()
    }
}

impl ProjectionField {
    pub fn new(metric: MetricField, matrix: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self { matrix: Arc::new(matrix), metric }
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn matrix(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let dim = self.metric.dim();
        check_dim(dim, q.len())?;
        let p = (self.matrix)(q);
        check_dim(dim, p.nrows())?;
        check_dim(dim, p.ncols())?;
        Ok(p)
    }

    pub fn apply(&self, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.matrix(q)? * v)
    }

    /// `|P·P - P|_∞`.
    pub fn idempotency_residual(&self, q: &[f64]) -> Result<f64> {
        let p = self.matrix(q)?;
        Ok((&p * &p - &p).amax())
    }

    /// `|g(PX, Y) - g(X, PY)|`.
    pub fn self_adjoint_residual(&self, q: &[f64], x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let p = self.matrix(q)?;
        let lhs = self.metric.inner(q, &(&p * x), y)?;
        let rhs = self.metric.inner(q, x, &(&p * y))?;
        Ok((lhs - rhs).abs())
    }

    /// Rank of `P` at `q`, counted from the trace (exact for projections).
    pub fn rank(&self, q: &[f64]) -> Result<usize> {
        Ok(self.matrix(q)?.trace().round().max(0.0) as usize)
    }
}

/// Christoffel symbols `Γ^k_ij` at one point, stored densely as `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.dim + i) * self.dim + j
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[self.idx(k, i, j)]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        let n = self.idx(k, i, j);
        self.data[n] = value;
    }

    /// `Γ^k_ij a^i b^j`, i.e. `∇_a b` for constant coordinate fields.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_iterator(
            n,
            (0..n).map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(k, i, j) * a[i] * b[j];
                    }
                }
                s
            }),
        )
    }

    /// `max |Γ^k_ij - Γ^k_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }
}

/// Levi-Civita Christoffel symbols via the Koszul formula in coordinates.
pub fn christoffel(metric: &MetricField, q: &[f64]) -> Result<Christoffel> {
    let at = metric.at(q)?;
    let n = metric.dim();
    // Symmetrize the partials so that the lower-index symmetry is exact in floating point.
    let d: Vec<DMatrix<f64>> = metric
        .partials(q)?
        .into_iter()
        .map(|m| (&m + m.transpose()) * 0.5)
        .collect();
    let mut out = Christoffel::zeros(n);
    for i in 0..n {
        for j in i..n {
            // first-kind symbols [ij, l]
            let lowered: Vec<f64> =
                (0..n).map(|l| 0.5 * (d[i][(j, l)] + d[j][(i, l)] - d[l][(i, j)])).collect();
            for k in 0..n {
                let v: f64 = (0..n).map(|l| at.inv[(k, l)] * lowered[l]).sum();
                out.set(k, i, j, v);
                out.set(k, j, i, v);
            }
        }
    }
    Ok(out)
}

/// Riemannian gradient `g^{-1} dV`.
pub fn gradient(metric: &MetricField, field: &ScalarField, q: &[f64]) -> Result<DVector<f64>> {
    let at = metric.at(q)?;
    Ok(at.inv * field.differential(q)?)
}

/// The quadratic term `Γ^k_ij v^i v^j` of the geodesic equation.
pub fn covariant_acceleration(metric: &MetricField, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(christoffel(metric, q)?.contract(v, v))
}

/// Residuals of metric compatibility and torsion-freeness for constant
/// coordinate vectors `X, Y, Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionReport {
    pub compatibility: f64,
    pub torsion: f64,
}

pub fn verify_connection_axioms(
    metric: &MetricField,
    q: &[f64],
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<ConnectionReport> {
    let gamma = christoffel(metric, q)?;
    connection_residuals(metric, &gamma, q, x, y, z)
}

/// Same as [`verify_connection_axioms`] but against caller-supplied symbols.
pub fn connection_residuals(
    metric: &MetricField,
    gamma: &Christoffel,
    q: &[f64],
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<ConnectionReport> {
    check_dim(metric.dim(), gamma.dim())?;
    let h = FD_STEP;
    let qp: Vec<f64> = q.iter().zip(x.iter()).map(|(a, b)| a + h * b).collect();
    let qm: Vec<f64> = q.iter().zip(x.iter()).map(|(a, b)| a - h * b).collect();
    let directional = (metric.inner(&qp, y, z)? - metric.inner(&qm, y, z)?) / (2.0 * h);
    let nabla_xy = gamma.contract(x, y);
    let nabla_xz = gamma.contract(x, z);
    let compat = directional - metric.inner(q, &nabla_xy, z)? - metric.inner(q, y, &nabla_xz)?;
    // [X, Y] = 0 for constant coordinate fields
    let torsion = (gamma.contract(x, y) - gamma.contract(y, x)).amax();
    Ok(ConnectionReport { compatibility: compat.abs(), torsion })
}

/// Worst-case connection residuals over all triples of coordinate directions.
pub fn verify_connection_axioms_coordinate(metric: &MetricField, q: &[f64]) -> Result<ConnectionReport> {
    let n = metric.dim();
    let gamma = christoffel(metric, q)?;
    let e = |i: usize| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
    let mut worst = ConnectionReport { compatibility: 0.0, torsion: gamma.max_asymmetry() };
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let r = connection_residuals(metric, &gamma, q, &e(a), &e(b), &e(c))?;
                worst.compatibility = worst.compatibility.max(r.compatibility);
                worst.torsion = worst.torsion.max(r.torsion);
            }
        }
    }
    Ok(worst)
}

/// Coordinate basis vector `e_i` in dimension `dim`.
pub fn basis(dim: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cart_metric(b: f64) -> MetricField {
        MetricField::new(2, move |q| {
            let c = q[0].cos();
            DMatrix::from_row_slice(2, 2, &[1.0, b * c, b * c, 1.0])
        })
    }

    #[test]
    fn euclidean_christoffel_vanishes() {
        let g = MetricField::euclidean(3);
        let gamma = christoffel(&g, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(gamma, Christoffel::zeros(3));
    }

    #[test]
    fn cart_christoffel_zero_at_upright() {
        let gamma = christoffel(&cart_metric(0.188), &[0.0, 0.7]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(gamma.get(k, i, j), 0.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn cart_christoffel_at_horizontal() {
        let b = 0.188;
        let gamma = christoffel(&cart_metric(b), &[FRAC_PI_2, 0.0]).unwrap();
        assert_abs_diff_eq!(gamma.get(1, 0, 0), -b, epsilon = 1e-9);
        assert_abs_diff_eq!(gamma.get(0, 0, 0), 0.0, epsilon = 1e-9);
        let acc = covariant_acceleration(&cart_metric(b), &[FRAC_PI_2, 0.0], &DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_abs_diff_eq!(acc[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(acc[1], -b, epsilon = 1e-9);
    }

    #[test]
    fn gradient_examples() {
        let flat = MetricField::euclidean(2);
        let v = ScalarField::new(2, |q| q[0].cos());
        let gr = gradient(&flat, &v, &[0.0, 5.0]).unwrap();
        assert_abs_diff_eq!(gr.amax(), 0.0, epsilon = 1e-10);

        let gr = gradient(&cart_metric(0.188), &v, &[FRAC_PI_2, 0.0]).unwrap();
        assert_abs_diff_eq!(gr[0], -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(gr[1], 0.0, epsilon = 1e-9);

        let quartic = ScalarField::new(2, |q| {
            let (x, y) = (q[0], q[1]);
            -1.5 * x.powi(4) + 45.0 * x * x * y * y + 32.0 * x * y.powi(3)
        });
        let gr = gradient(&flat, &quartic, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(gr[0], -6.0, epsilon = 1e-8);
        assert_abs_diff_eq!(gr[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_velocity_gives_zero_acceleration() {
        let acc = covariant_acceleration(&cart_metric(0.5), &[0.4, 0.0], &DVector::zeros(2)).unwrap();
        assert_eq!(acc.amax(), 0.0);
    }

    #[test]
    fn singular_metric_is_refused() {
        let g = MetricField::new(2, |_| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(matches!(christoffel(&g, &[0.0, 0.0]), Err(Error::SingularMetric { .. })));
        let flat = MetricField::euclidean(2);
        assert!(matches!(gradient(&g, &ScalarField::zero(2), &[0.0, 0.0]), Err(Error::SingularMetric { .. })));
        assert!(flat.at(&[0.0]).is_err());
    }

    #[test]
    fn region_is_enforced() {
        let g = MetricField::euclidean(2).with_region(|q| q[0] < 1.0);
        assert!(g.at(&[0.5, 0.0]).is_ok());
        assert!(matches!(g.at(&[1.5, 0.0]), Err(Error::OutsideRegion { .. })));
    }

    #[test]
    fn asymmetric_components_rejected() {
        let g = MetricField::new(2, |_| DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]));
        assert!(matches!(g.components(&[0.0, 0.0]), Err(Error::AsymmetricMetric { .. })));
    }

    #[test]
    fn euclidean_connection_residuals_zero() {
        let g = MetricField::euclidean(2);
        let r = verify_connection_axioms_coordinate(&g, &[0.1, 0.2]).unwrap();
        assert_eq!(r.compatibility, 0.0);
        assert_eq!(r.torsion, 0.0);
    }

    #[test]
    fn asymmetrized_gamma_has_torsion() {
        let g = cart_metric(0.188);
        let q = [0.7, 0.0];
        let mut gamma = christoffel(&g, &q).unwrap();
        gamma.set(1, 0, 1, gamma.get(1, 0, 1) + 0.25);
        let r = connection_residuals(&g, &gamma, &q, &basis(2, 0), &basis(2, 1), &basis(2, 0)).unwrap();
        assert!(r.torsion > 0.2);
    }

    #[test]
    fn odd_velocity_map_residual() {
        let c = VelocityMap::new(2, true, |q, v| v * q[0].cos());
        let v = DVector::from_vec(vec![0.3, -1.2]);
        assert_eq!(c.odd_residual(&[0.4, 0.0], &v).unwrap(), 0.0);
        let even = VelocityMap::new(2, false, |_, v| v.map(|a| a * a));
        assert!(even.odd_residual(&[0.0, 0.0], &v).unwrap() > 0.1);
    }

    #[test]
    fn cart_projection_laws() {
        let b = 0.188;
        let p = ProjectionField::new(cart_metric(b), move |q| {
            DMatrix::from_row_slice(2, 2, &[1.0, b * q[0].cos(), 0.0, 0.0])
        });
        let q = [0.9, -0.3];
        assert!(p.idempotency_residual(&q).unwrap() < 1e-12);
        let x = DVector::from_vec(vec![0.3, -1.1]);
        let y = DVector::from_vec(vec![2.0, 0.5]);
        assert!(p.self_adjoint_residual(&q, &x, &y).unwrap() < 1e-12);
        assert_eq!(p.rank(&q).unwrap(), 1);
        // kernel vectors are g-orthogonal to d/dθ
        let vx = 1.7;
        let kernel = DVector::from_vec(vec![-b * q[0].cos() * vx, vx]);
        assert_eq!(p.metric().inner(&q, &kernel, &basis(2, 0)).unwrap(), 0.0);
    }
}
