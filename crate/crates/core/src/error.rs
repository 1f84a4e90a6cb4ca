use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not D4-symmetric: pixel ({r0},{c0}) differs from its image ({r1},{c1})")]
    SymmetryViolation {
        r0: usize,
        c0: usize,
        r1: usize,
        c1: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge at wavevector ({gx:.6}, {gy:.6}): {detail}")]
    EigenNonConvergence { gx: f64, gy: f64, detail: String },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("no feasible solution: {0}")]
    Infeasible(String),

    #[error("sampling budget exhausted after {attempts} attempts")]
    BudgetExhausted { attempts: u64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
