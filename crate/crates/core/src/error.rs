use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("rank deficiency in {what}: smallest singular value {sigma_min:e} (condition number {condition:e})")]
    RankDeficient {
        what: String,
        sigma_min: f64,
        condition: f64,
    },

    #[error("eigenvalues not real and separated: {0}")]
    EigenSeparation(String),

    #[error("Markov chain structure: {0}")]
    Structure(String),

    #[error("insufficient data: got {got} observations, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("diagonalization failed after {attempts} rotation draws: {last}")]
    Diagonalization { attempts: usize, last: String },

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::EigenSeparation(_)
                | Error::Estimation(_)
                | Error::Diagonalization { .. }
                | Error::Structure(_)
        )
    }
}
