use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown tensor factor label `{0}`")]
    UnknownLabel(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid density state: {0}")]
    InvalidState(String),
    #[error("index {index} out of range (expected < {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("probability `{name}` = {value} outside [0, 1]")]
    Probability { name: String, value: f64 },
    #[error("twisting operator is missing block {0}")]
    MissingBlock(String),
    #[error("block {0} is not unitary")]
    NotUnitary(String),
    #[error("Kraus operators are not trace preserving (deviation {0:.3e})")]
    KrausIncomplete(f64),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible parameters: constraint `{constraint}` cannot be met ({detail})")]
    Infeasible { constraint: String, detail: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
