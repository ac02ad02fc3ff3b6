//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, parsing and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("values and probabilities have different lengths ({values} vs {probs})")]
    LengthMismatch { values: usize, probs: usize },

    #[error("no scenarios")]
    NoScenarios,

    #[error("negative probability {prob} at atom {index}")]
    NegativeProbability { index: usize, prob: f64 },

    #[error("probabilities sum to {sum}")]
    ProbabilitySum { sum: f64 },

    #[error("non-finite value {value} at atom {index}")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bracket expansion failed after {0} doublings; the objective keeps decreasing")]
    BracketExpansion(u32),

    #[error("no closed form is available for this risk kind")]
    ClosedFormUnavailable,

    #[error("point lies outside the decision set")]
    OutsideDecisionSet,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("saddle verification requires an optimal solve result")]
    SaddleRequiresOptimal,
}

pub type Result<T> = std::result::Result<T, Error>;
