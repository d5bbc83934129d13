use thiserror::Error;

/// Errors raised by state construction, device evaluation and the checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsimError {
    #[error("invalid factor space: {0}")]
    InvalidSpace(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("invalid outcome selector: {0}")]
    InvalidSelector(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

pub type Result<T> = std::result::Result<T, QsimError>;
