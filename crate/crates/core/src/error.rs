use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty target set")]
    EmptySet,

    #[error("non-finite value at label {0}")]
    NonFinite(String),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("affine pair ({0}, {1}) references a label twice")]
    DegenerateAffinePair(String, String),

    #[error("disconnecting departure of agent {0}")]
    DisconnectingDeparture(u64),

    #[error("isolated arrival of agent {0}")]
    IsolatedArrival(u64),

    #[error("invalid churn delta: {0}")]
    InvalidDelta(String),

    #[error("prox solver stalled after {iterations} iterations (gradient norm {residual:e})")]
    SolverStalled { iterations: usize, residual: f64 },

    #[error("nonsmooth cost has no gradient")]
    NonsmoothCost,

    #[error("contraction slower than departure bound (gamma {gamma} >= beta {beta})")]
    SlowContraction { gamma: f64, beta: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty window after burn-in")]
    EmptyWindow,

    #[error("empty trace")]
    EmptyTrace,

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    ConfigSerialize(#[from] toml::ser::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the simulation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::ConfigParse(_)
                | Error::UnknownScenario(_)
                | Error::SlowContraction { .. }
                | Error::InvalidInterval { .. }
        )
    }
}
