use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for basis of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("index tuple has length {got}, expected kernel order {expected}")]
    WrongTupleLength { got: usize, expected: usize },

    #[error("non-finite coefficient {0}")]
    NonFinite(f64),

    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("contraction index p = {p} outside 0..={max}")]
    ContractionRange { p: usize, max: usize },

    #[error("kernel of order {0} has no nontrivial contractions")]
    NoContractions(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("grid under-resolved: {0}")]
    UnderResolved(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal the input lies outside the hypotheses the
    /// theory is stated under (as opposed to malformed input or I/O trouble).
    pub fn is_assumption_violation(&self) -> bool {
        matches!(self, Error::Assumption(_) | Error::UnderResolved(_))
    }
}
