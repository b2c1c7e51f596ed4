use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value:e}, error {error:e}")]
    QuadratureNonConvergence { a: f64, b: f64, value: f64, error: f64 },

    #[error("profile is not in the admissible class: {0}")]
    NotInClassK(String),

    #[error("R1 bracket not found below cap {cap}")]
    R1BracketNotFound { cap: f64 },

    #[error("non-finite state on path {path} at t = {t}")]
    NonFiniteState { path: usize, t: f64 },

    #[error("all Feynman-Kac weights below floor at point {point} (min W = {min_w})")]
    WeightUnderflow { point: usize, min_w: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exact transport cost limited to {cap} samples, got {n}")]
    ExactModeOverCap { n: usize, cap: usize },

    #[error("flow map is not monotone at anchor {anchor} (t = {t}); reduce the ODE step")]
    MonotonicityViolation { anchor: usize, t: f64 },

    #[error("flow did not converge by t = {t_max} (last slice change {change:e})")]
    FlowNotConverged { t_max: f64, change: f64 },

    #[error("point {0:?} lies outside the field domain")]
    OutsideDomain(Vec<f64>),

    #[error("missing constant `{0}` for the selected mode")]
    MissingConstant(&'static str),

    #[error("quadrature value {quadrature} exceeds closed form {closed} for {case}")]
    QuadratureExceedsClosedForm { case: String, closed: f64, quadrature: f64 },

    #[error("missing Hessian callback for potential")]
    MissingHessian,

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
