use alloc::string::String;

pub type Result<T> = core::result::Result<T, QiglError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QiglError {
    #[error("size error: {0}")]
    Size(String),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    Index { index: usize, n_qubits: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("state is not normalized (norm deviation {deviation:e})")]
    State { deviation: f64 },
    #[error("rank error: {0}")]
    Rank(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("degenerate scale: pca_min ({min}) must be below pca_max ({max})")]
    DegenerateScale { min: f64, max: f64 },
    #[error("need at least 2 samples, got {0}")]
    SampleSize(usize),
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    #[error("training diverged: {0}")]
    Divergence(String),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> QiglError {
    QiglError::Shape(msg.into())
}
