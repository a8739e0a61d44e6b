use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration budget exceeded: an estimated {estimated:.3e} candidates against a budget of {budget}")]
    BudgetExceeded { estimated: f64, budget: u64 },

    #[error("packing construction failed after {attempts} attempts (d={d}, s={s}, target size {target})")]
    ConstructionFailed {
        d: usize,
        s: usize,
        target: usize,
        attempts: usize,
    },

    #[error("certificate check failed: {0}")]
    Certificate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point is outside the feasible set")]
    Infeasible,

    #[error("empty point list")]
    EmptyFeasibleSet,

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
