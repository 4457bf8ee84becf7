use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A network, source, or drain description violates its invariants.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// A scalar parameter is out of its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The operation is undefined for an independent (uncorrelated) source.
    #[error("operation requires a correlated source")]
    RequiresCorrelatedSource,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    /// Linear solver or propagator broke down; distinct from certified divergence.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("network file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input, as opposed to numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
