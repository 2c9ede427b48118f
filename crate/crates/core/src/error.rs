use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Class and cluster indices carried by variants are 1-based, matching the
/// file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZslError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("NonFinite: {0}")]
    NonFinite(String),
    #[error("ZeroColumn: column {0} has L1 norm below 1e-12")]
    ZeroColumn(usize),
    #[error("EmptyClass: class {0} has no instances")]
    EmptyClass(usize),
    #[error("InvalidAssignment: {0}")]
    InvalidAssignment(String),
    #[error("InvalidHyperparams: {0}")]
    InvalidHyperparams(String),
    #[error("SingularSystem: {0}")]
    SingularSystem(String),
    #[error("TooFewPoints: need {needed} distinct points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("LengthMismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("InvalidCounts: {0}")]
    InvalidCounts(String),
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("NoValidGridPoint: every grid run failed")]
    NoValidGridPoint,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("ParseError: {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("IoError: {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, ZslError>;
