use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by game construction, solvers, dynamics and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{what} index {index} out of range (bound {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("enumeration of {count} policies exceeds limit {limit}")]
    EnumerationLimit { count: u128, limit: u128 },
    #[error("game failed validation: {0}")]
    InvalidGame(String),
    #[error("non-finite learner state for agent {agent} at stage {stage}")]
    NonFinite { stage: u64, agent: usize },
    #[error("value iteration did not reach tolerance within {0} sweeps")]
    NotConverged(usize),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable kind, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Index { .. } => "index",
            Error::Parameter(_) => "parameter",
            Error::EnumerationLimit { .. } => "enumeration_limit",
            Error::InvalidGame(_) => "invalid_game",
            Error::NonFinite { .. } => "non_finite",
            Error::NotConverged(_) => "not_converged",
            Error::Config(_) => "config",
            Error::Trial { .. } => "trial",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
