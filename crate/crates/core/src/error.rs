use thiserror::Error;

/// Errors raised while building, simulating or fitting a population model.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent model / engine configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Missing or malformed input data (covariates, observations).
    #[error("data error: {0}")]
    Data(String),

    /// A rate or parameter outside the range its process allows.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state vector or cell reference that does not match the schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A state vector with invalid contents (negative, non-integral, overflow).
    #[error("state error: {0}")]
    State(String),

    /// The requested operation is not defined for this model form.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Every particle received zero likelihood.
    #[error("all particle weights are zero at year {year}")]
    Degeneracy { year: i32 },

    /// Empirical covariance with no spread in any direction.
    #[error("singular parameter covariance: {0}")]
    SingularCovariance(String),

    /// Enumeration lost more probability mass than the oracle tolerates.
    #[error("oracle invalid: lost mass {lost:.3e} exceeds tolerance")]
    OracleInvalid { lost: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain(_)
            | Error::Schema(_)
            | Error::Unsupported(_)
            | Error::SingularCovariance(_) => 2,
            Error::Data(_) | Error::State(_) | Error::Io(_) => 3,
            Error::Degeneracy { .. } => 4,
            Error::OracleInvalid { .. } => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
