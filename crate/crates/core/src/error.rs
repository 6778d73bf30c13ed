use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data that the operation refuses (non-finite samples, bad shapes).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("component mismatch: expected {expected} component(s), found {found}")]
    ComponentMismatch { expected: usize, found: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("multiplier is not finite at wavevector {k:?}")]
    OperatorDefinition { k: [f64; 3] },

    #[error("spectrum violates Hermitian symmetry (defect {defect:.3e})")]
    SymmetryViolation { defect: f64 },

    #[error("block index {q} outside [{min}, {max}]")]
    BlockOutOfRange { q: i32, min: i32, max: i32 },

    #[error("CFL violated: dt = {dt:.3e} exceeds limit {max_dt:.3e}; suggested dt = {suggested:.3e}")]
    Cfl { dt: f64, max_dt: f64, suggested: f64 },

    #[error("solution blew up at t = {t:.6}")]
    BlowUp { t: f64 },

    #[error("vacuum: density is non-positive at {count} sample(s)")]
    Vacuum { count: usize },

    #[error("iteration diverged at m = {m}: {reason}")]
    Divergence { m: usize, reason: String },

    #[error("time quadrature needs at least {needed} snapshot(s), got {got}")]
    Quadrature { needed: usize, got: usize },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }
}
