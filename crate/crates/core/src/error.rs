use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid objective spec: {0}")]
    ObjectiveSpec(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no complete hypothesis within n_max = {n_max}")]
    NoHypothesis { n_max: usize },

    #[error("search space too large: {what} exceeds limit {limit}")]
    SearchSpace { what: String, limit: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
