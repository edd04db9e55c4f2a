use thiserror::Error;

use crate::hilbert::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("block count mismatch: expected {expected}, found {found}")]
    BlockCount { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The resolvent `(Id + gamma A)^{-1}` is not guaranteed single-valued.
    #[error("ill-posed resolvent: 1 + gamma*sigma = {margin:e} <= 0 (gamma = {gamma}, sigma = {sigma})")]
    IllPosed { gamma: f64, sigma: f64, margin: f64 },

    #[error("ill-posed block {block}: 1 + gamma_i*sigma_i = {margin:e} <= 0")]
    IllPosedBlock { block: usize, margin: f64 },

    #[error("inner solve did not reach tolerance: residual {residual:e} after {iterations} iterations")]
    InnerSolve { residual: f64, iterations: usize },

    #[error("prox refused: kappa*omega = {product} >= 1, prox may be empty or multi-valued")]
    ProxRefused { product: f64 },

    #[error("singular linear system")]
    Singular,

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("no root in bracket: g({lo}) = {g_lo:e}, g({hi}) = {g_hi:e}")]
    NoRoot { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("empty feasible grid")]
    EmptyGrid,

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("operator cannot be evaluated: {0}")]
    NotEvaluable(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
