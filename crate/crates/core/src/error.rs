use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("matching is not Jaillet-Lu feasible: {0}")]
    InfeasibleMatching(String),

    #[error("matching does not satisfy the preprocessed form: {0}")]
    NotPreprocessed(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
