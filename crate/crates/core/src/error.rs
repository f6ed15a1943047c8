use thiserror::Error;

/// Errors raised by the orbiquant modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("unknown group element {element} (group order {order})")]
    UnknownElement { element: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("conic singularity: covector is zero (|xi| = {norm:e})")]
    ConicSingularity { norm: f64 },

    #[error(
        "implicit solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("not on conormal bundle: |J| = {momentum:e} exceeds {tol:e}")]
    NotConormal { momentum: f64, tol: f64 },

    #[error("not invariant: {0}")]
    NotInvariant(String),

    #[error("not hermitian: max |B - B*| = {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("invalid flow configuration: {0}")]
    InvalidFlow(String),

    #[error("closed-form pullback unavailable: {0}")]
    PullbackUnavailable(String),

    #[error("non-recoverable U_k decomposition: {0}")]
    NotRecoverable(String),

    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
