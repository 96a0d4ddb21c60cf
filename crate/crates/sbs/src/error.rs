//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SbsError {
    /// A full-space construction would exceed the configured dimension cap.
    #[error("dimension {dim} exceeds the cap {cap}; raise the cap or shrink the model")]
    DimensionCap { dim: usize, cap: usize },

    /// Incompatible matrix or vector shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An input failed its structural validation (Hermiticity, trace, PSD, norm, weights).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Linearly dependent vectors where independence is required.
    #[error("linearly dependent input at index {index} (smallest Gram eigenvalue {gram_eigenvalue:.3e})")]
    Degenerate { index: usize, gram_eigenvalue: f64 },

    /// Evolved branch states of an environment became linearly dependent.
    #[error("degenerate evolved branch states in environment {env} at t = {t}")]
    DegenerateBranches { env: usize, t: f64 },

    /// A POVM does not carry enough effects for the ensemble.
    #[error("POVM has {effects} effects but the ensemble has {states} states")]
    Arity { effects: usize, states: usize },

    /// The operation needs Kraus operators and the POVM carries none.
    #[error("operation requires Kraus operators but the POVM carries none")]
    MissingKraus,

    /// Index out of range.
    #[error("index {index} out of range ({context})")]
    Index { index: usize, context: String },

    /// A scalar argument is outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition documented on the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SbsError>;
