use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum PodError {
    /// A caller-supplied parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Operand dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A matrix or factor file could not be decoded.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Text input (CSV) could not be parsed.
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Every candidate has zero sampling weight.
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    /// A dense decomposition failed to converge.
    #[error("decomposition did not converge: {0}")]
    NonConvergence(String),

    /// NaN or infinity where finite values are required.
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PodError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        PodError::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        PodError::Shape(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        PodError::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            PodError::Parameter(_) | PodError::Shape(_) => 2,
            PodError::Format { .. } | PodError::Parse { .. } | PodError::NonFinite { .. } => 3,
            PodError::Io(_) => 3,
            PodError::DegenerateDistribution(_) => 4,
            PodError::NonConvergence(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, PodError>;
