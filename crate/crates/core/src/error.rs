use thiserror::Error;

/// Failure modes of the dense state, channel, diagnostic and recovery layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |m - m^dagger| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace {trace} is not one")]
    InvalidTrace { trace: f64 },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("invalid site set: {0}")]
    BadSiteSet(String),

    #[error("{n_sites} sites exceeds the dense cap of {cap}")]
    TooLarge { n_sites: usize, cap: usize },

    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),

    #[error("invalid channel weights: {0}")]
    BadWeights(String),

    #[error("Kraus completeness violated by {0:e}")]
    CompletenessViolated(f64),

    #[error("purity {0:e} is too small for a Renyi-2 ratio")]
    DegeneratePurity(f64),

    #[error("invalid partition: {0}")]
    BadPartition(String),

    #[error("reference state is singular: {0}")]
    SingularReference(String),

    #[error("invalid recovery schedule: {0}")]
    BadSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
