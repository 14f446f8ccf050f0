//! Error taxonomy shared across the library.
//!
//! The variants mirror the failure classes the operations advertise:
//! configuration problems, violated structural hypotheses (positivity of the
//! potential, sign of the weight), contract breaches (size or index
//! mismatches), solver breakdowns carrying their last residual, and
//! non-finite evaluations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver failure: {context} (residual {residual:.3e} after {iterations} iterations)")]
    Solver {
        context: String,
        residual: f64,
        iterations: usize,
    },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("unbounded objective: {0}")]
    Unbounded(String),
}

pub type Result<T> = std::result::Result<T, SmsError>;
