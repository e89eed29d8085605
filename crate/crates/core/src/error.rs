use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the loopforge core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("solver backend error: {0}")]
    Backend(String),

    #[error("backend `{0}` cannot return dual values")]
    NoDuals(String),

    #[error("solver returned status {status:?} for `{model}`")]
    Status {
        model: String,
        status: crate::solver::SolveStatus,
    },

    #[error("variable `{name}` has fractional value {value} where a binary was expected")]
    FractionalBinary { name: String, value: f64 },

    #[error("subproblem for scenario {scenario}, step {step} is infeasible")]
    InfeasibleSubproblem { scenario: usize, step: usize },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("brute-force oracle refuses {n} actors (limit {limit})")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("candidate enumeration exceeded {cap} loops while expanding clique {clique:?}")]
    TooManyCandidates { cap: usize, clique: Vec<String> },

    #[error("{path}: {source}")]
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
