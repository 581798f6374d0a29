use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {column} sums to zero")]
    ZeroColumn { column: usize },
    #[error("negative entry {value} at flat index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("non-finite input at index {index}")]
    NonFiniteInput { index: usize },
    #[error("support mismatch: {left} vs {right}")]
    SupportMismatch { left: usize, right: usize },
    #[error("q places mass on index {index} where p has none")]
    AbsoluteContinuityViolation { index: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("non-positive concentration {value} at flat index {index}")]
    NonPositiveConcentration { index: usize, value: f64 },
    #[error("entries sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("unknown modality {0}")]
    UnknownModality(usize),
    #[error("unknown action {0}")]
    UnknownAction(usize),
    #[error("unknown control index {index} for factor {factor}")]
    UnknownControlIndex { factor: usize, index: usize },
    #[error("observation index {index} out of range for modality {modality}")]
    ObservationOutOfRange { modality: usize, index: usize },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("contradictory evidence: factor {factor} has zero posterior mass")]
    ContradictoryEvidence { factor: usize },
    #[error("{count} policies exceed the enumeration cap of {cap}")]
    HorizonOverflow { count: u128, cap: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("array for factor {factor} is frozen")]
    FrozenArray { factor: usize },
    #[error("stiffness reduction {delta} is beyond the failure threshold")]
    OutOfRange { delta: f64 },
    #[error("reference EFE sum is zero")]
    DegenerateReference,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model failed validation:\n{0}")]
    InvalidModel(ValidationReport),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
