use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree: {0}")]
    InvalidDegree(String),

    #[error("degree mismatch: {left:?} vs {right:?}")]
    DegreeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("cell index {index:?} out of range for degree {degree:?}")]
    CellOutOfRange { index: Vec<usize>, degree: Vec<usize> },

    #[error("invalid copula masses: {0}")]
    InvalidMasses(String),

    #[error("degenerate rectangle exchange: {0}")]
    DegenerateExchange(String),

    #[error("exchange amount {epsilon} outside feasible interval [{lo}, {hi}]")]
    StepOutOfBounds { epsilon: f64, lo: f64, hi: f64 },

    #[error("invalid grid cut: {0}")]
    InvalidCut(String),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("invalid prior specification: {0}")]
    InvalidPrior(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
