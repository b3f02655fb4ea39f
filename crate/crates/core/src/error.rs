use thiserror::Error;

use crate::space::Vector;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("vector must have at least one coordinate")]
    EmptyVector,

    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not symmetric (max |Q - Q^T| = {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("pair list is empty")]
    EmptyPairs,

    #[error("not enriched strictly pseudocontractive at b = {b}: degenerate pair has positive excess {excess:e}")]
    NotEnrichedSpc { b: f64, excess: f64, x: Vector, y: Vector },

    #[error("explicit schedule exhausted at index {index} (length {len})")]
    ScheduleExhausted { index: usize, len: usize },

    #[error("control value alpha_{index} = {alpha} outside ({k}, 1)")]
    AlphaOutOfRange { index: usize, alpha: f64, k: f64 },

    #[error("step {gamma} outside the safe range (0, {upper})")]
    GammaOutOfRange { gamma: f64, upper: f64 },

    #[error("trace did not converge")]
    NotConverged,

    #[error("no reference fixed point: {0}")]
    MissingReference(String),

    #[error("operation requires a {expected} trace")]
    WrongScheme { expected: &'static str },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
