use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is singular at q = {q:?} (|det| = {det:e}, margin {margin:e})")]
    SingularMetric { q: Vec<f64>, det: f64, margin: f64 },

    #[error("point q = {q:?} lies outside the declared valid region of the metric")]
    OutsideRegion { q: Vec<f64> },

    #[error("metric components are not symmetric at q = {q:?} (max asymmetry {asym:e})")]
    AsymmetricMetric { q: Vec<f64>, asym: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, tol: f64 },

    #[error("characteristic through (theta = {theta}, x = {x}) leaves the valid range before reaching the initial surface")]
    CharacteristicEscape { theta: f64, x: f64 },

    #[error("model metric is degenerate at theta = {theta} (det = {det:e})")]
    DegenerateModelMetric { theta: f64, det: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("linearized system is not controllable (controllability determinant {det:e})")]
    NotControllable { det: f64 },

    #[error("complex poles must come in conjugate pairs")]
    ComplexPolesNotConjugate,

    #[error("t = {t} is at or past the blow-up time {t_blowup}")]
    PastBlowup { t: f64, t_blowup: f64 },

    #[error("non-finite state encountered: {0:?}")]
    NonFiniteState(Vec<f64>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
