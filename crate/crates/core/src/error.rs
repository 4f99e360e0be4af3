use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid database: {0}")]
    InvalidDatabase(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("incomplete input: {0}")]
    IncompleteInput(String),
    #[error("query {0} is not covered by the synopsis")]
    NotInSupport(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("malformed synopsis: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
