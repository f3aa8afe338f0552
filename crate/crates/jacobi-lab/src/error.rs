use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("plane lies outside the chart domain: {0}")]
    ChartDomain(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("no admissible transversal plane found after {0} draws")]
    SearchExhausted(usize),

    #[error("moving-frame integration lost accuracy: {0}")]
    Integration(String),
}

impl Error {
    /// True for failures caused by the numerics rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Dimension(_) | Error::Invalid(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
