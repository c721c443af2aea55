use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("adjacency is not symmetric at ({0}, {1})")]
    AsymmetricAdjacency(usize, usize),

    #[error("agent {agent} references out-of-range neighbor {neighbor}")]
    NeighborOutOfRange { agent: usize, neighbor: usize },

    #[error("agent {0} is not a legitimate agent")]
    NotLegitimate(usize),

    #[error("invalid trust parameters: {0}")]
    InvalidTrustParams(String),

    #[error("missing trust observation for edge ({0}, {1})")]
    MissingObservation(usize, usize),

    #[error("kappa must be positive, got {0}")]
    InvalidKappa(f64),

    #[error("agent {agent} trusts {other}, which is not one of its neighbors")]
    TrustedNonNeighbor { agent: usize, other: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not reversible with respect to the given vector: {0}")]
    NotReversible(String),

    #[error("time {t} precedes the first consensus step {first}")]
    TimeBeforeStart { t: i64, first: i64 },

    #[error("{name} out of range: {reason}")]
    OutOfRange { name: &'static str, reason: String },

    #[error("{0} did not converge")]
    NotConverged(&'static str),

    #[error("invalid simulation config: {0}")]
    InvalidSimulation(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, reason: impl Into<String>) -> Self {
        Error::OutOfRange { name, reason: reason.into() }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether the error comes from reading or writing files rather than from bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
