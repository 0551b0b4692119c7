use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tau = {tau} lies outside the disk |tau - s| <= s for s = {s}")]
    ExtendedRange { s: f64, tau: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no convergence: {what} (worst residual {worst_residual:e})")]
    NoConvergence { what: String, worst_residual: f64 },
    #[error("points {i} and {j} are {separation:e} apart, below the collision guard")]
    CollisionDetected { i: usize, j: usize, separation: f64 },
    #[error("point {index} is zero; the multiplicative flow is undefined there")]
    ZeroPoint { index: usize },
    #[error("collision at t = {t} could not be resolved without fallback")]
    CollisionUnresolved { t: f64 },
    #[error("ambiguous matching: two assignments cost {best:e} and {second:e}")]
    AmbiguousMatch { best: f64, second: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("evaluation point coincides with point {index}")]
    PoleHit { index: usize },
    #[error("report grids differ")]
    GridMismatch,
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("Monte Carlo mean is not positive at grid point {index}")]
    NonpositiveMean { index: usize },
    #[error("finite-difference stencil is ill-conditioned: {0}")]
    StencilIllConditioned(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
