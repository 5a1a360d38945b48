use thiserror::Error;

use crate::optimizer::TraceEntry;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular linear system: zero pivot at row {pivot}")]
    SingularSystem { pivot: usize },

    #[error("Newton iteration failed at time step {step}: residual {residual:e} after {iterations} iterations")]
    NewtonFailed {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("adjoint system singular at time step {step} (pivot row {pivot})")]
    AdjointSingular { step: usize, pivot: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("forward solve failed at delta1 = {delta1}: {source}")]
    AtParameter {
        delta1: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit failed after {} iterations: {message}", trace.len())]
    FitFailed {
        message: String,
        trace: Vec<TraceEntry>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn at_parameter(self, delta1: f64) -> Self {
        match self {
            e @ Error::AtParameter { .. } => e,
            e => Error::AtParameter {
                delta1,
                source: Box::new(e),
            },
        }
    }
}
