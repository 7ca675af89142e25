use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A covariance model cannot be realized as a valid correlation matrix.
    #[error("invalid covariance model: {reason}")]
    ModelInvalid { reason: String, min_eigenvalue: Option<f64> },

    /// A transform or normalizer fails an admissibility guard.
    #[error("inadmissible: {0}")]
    Inadmissible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn model(reason: impl Into<String>) -> Self {
        Error::ModelInvalid { reason: reason.into(), min_eigenvalue: None }
    }
}
