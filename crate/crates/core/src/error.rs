use thiserror::Error;

/// Errors produced by estimation, inference and the supporting chain utilities.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no transitions: a sequence needs at least two states")]
    NoTransitions,

    #[error("state {state} at position {position} is outside 1..={k}")]
    StateOutOfRange { state: usize, position: usize, k: usize },

    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter {index} = {value} is outside [{lo}, {hi}]")]
    ParameterOutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("KLD undefined: model probability is zero where the data has mass")]
    KldUndefined,

    #[error("data outside model support: empirical mass on {cells} cell(s) the model gives probability zero")]
    OutsideSupport { cells: usize },

    #[error("unreachable state {row}: stationary weight is zero but the row carries support cells")]
    UnreachableState { row: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("Psi matrix is singular (rank condition on the Jacobian fails): {0}")]
    SingularPsi(String),

    #[error("family does not support this operation: {0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
