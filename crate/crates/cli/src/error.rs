use thiserror::Error;

use foldsearch_core::search::SearchError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config, or input files.
    #[error("{0}")]
    Config(String),
    /// A folding service or proposer endpoint failed after retries.
    #[error("remote failure: {0}")]
    Remote(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Remote(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            e if e.is_remote() => CliError::Remote(e.to_string()),
            SearchError::Config(msg) => CliError::Config(msg),
            e => CliError::Internal(e.to_string()),
        }
    }
}
