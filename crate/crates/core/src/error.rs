use thiserror::Error;

use crate::dist::DistError;

/// Errors raised by the RSA, (RSA)² and QUD model code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("rationality parameter must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("utterance cost must be non-negative and not NaN, got {value} for utterance {utterance}")]
    InvalidCost { utterance: usize, value: f64 },
    #[error("rhetorical function `{strategy}` returned {value}, outside [0, 1]")]
    InvalidRhetoricalValue { strategy: String, value: f64 },
    #[error("`{0}` is not a value of the numbers price space")]
    LabelOutOfSpace(String),
    #[error("meaning prior is zero for meaning {meaning}; cannot divide by it")]
    DivisionByZeroPrior { meaning: String },
    #[error("meaning prior P({meaning} | {context}) is zero, which the reduction requires to be positive")]
    ZeroPriorViolation { context: String, meaning: String },
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

impl ModelError {
    pub fn is_all_zero_mass(&self) -> bool {
        matches!(self, ModelError::Dist(DistError::AllZeroMass))
    }
}

pub type ModelResult<T> = Result<T, ModelError>;
