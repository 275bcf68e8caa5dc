use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("resource limit exceeded: {0}")]
    ResourceExceeded(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::ResourceExceeded(_) => 3,
            CliError::Numeric(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<mixedorder_core::Error> for CliError {
    fn from(e: mixedorder_core::Error) -> Self {
        use mixedorder_core::Error as E;
        match e {
            E::TooLarge { .. } => CliError::ResourceExceeded(e.to_string()),
            E::BadProbability(_)
            | E::InvalidArgument(_)
            | E::BadPartition(_)
            | E::BadSchedule(_)
            | E::BadSiteSet(_) => CliError::ConfigInvalid(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<mixedorder_statmech::Error> for CliError {
    fn from(e: mixedorder_statmech::Error) -> Self {
        use mixedorder_statmech::Error as E;
        match e {
            E::Core(inner) => inner.into(),
            E::TooLarge { .. } => CliError::ResourceExceeded(e.to_string()),
            E::BadGrid(_) | E::BadAlpha(_) | E::BadProbability(_) | E::InvalidArgument(_) => {
                CliError::ConfigInvalid(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
