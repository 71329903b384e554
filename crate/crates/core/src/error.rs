use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid grid function: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("symbol is not finite at frequency {freq:?}")]
    SymbolNotFinite { freq: Vec<f64> },

    #[error("multiplier does not fit the grid: {0}")]
    IncompatibleMultiplier(String),

    #[error("Bessel kernel diverges at r = 0 for s = {s} <= d = {dim}")]
    DivergentKernel { s: f64, dim: usize },

    #[error("quadrature did not converge (achieved relative tolerance {achieved:e})")]
    QuadratureNonConvergence { achieved: f64 },

    #[error("degenerate exponent: delta = 0 forces alpha = 0")]
    DegenerateExponent,

    #[error("structure condition violated: {0}")]
    StructureViolation(String),

    #[error("Picard iteration did not converge at step {step} (residual {residual:e})")]
    PicardNonConvergence { step: usize, residual: f64 },

    #[error("linear solve did not converge at step {step} (residual {residual:e})")]
    LinearSolve { step: usize, residual: f64 },

    #[error("solution is not finite after step {step}")]
    BlowUp { step: usize },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
