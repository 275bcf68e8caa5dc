use thiserror::Error;

/// Failure modes of the enumeration and Monte Carlo layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} needs {bits} enumerated spins, above the cap of {cap}")]
    TooLarge { what: &'static str, bits: usize, cap: usize },

    #[error("invalid grid: {0}")]
    BadGrid(String),

    #[error("rotor alpha {0} must be positive and finite")]
    BadAlpha(f64),

    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Core(#[from] mixedorder_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
