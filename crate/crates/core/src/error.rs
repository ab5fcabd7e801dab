use thiserror::Error;

use crate::optimize::OptimizationTrace;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("curve is not regular: {0}")]
    Regularity(String),

    #[error("Frenet frame undefined: {0}")]
    FrameUndefined(String),

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    /// Invalid configuration; the message names the offending field.
    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// Optimization produced a non-finite or unevaluable loss. The partial
    /// trace is kept.
    #[error("optimization diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String, trace: Box<OptimizationTrace> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Configuration(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Json(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
