//! Crate-wide error type. Variants map onto the CLI exit codes:
//! configuration problems exit 1, numerical divergence exits 2, I/O
//! failures exit 3.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("client id {id} out of range (have {num_clients} clients)")]
    UnknownClient { id: usize, num_clients: usize },

    #[error("participant {0} has no delta for this round")]
    MissingDelta(usize),

    #[error("cannot aggregate an empty set of updates")]
    EmptyAggregate,

    #[error("non-finite update passed to the server step")]
    NonFiniteDelta,

    #[error("operation requires the {expected} family, state holds {actual}")]
    WrongFamily { expected: String, actual: String },

    #[error("server state has taken no step yet")]
    NoStepTaken,

    #[error("malformed compressed payload: {0}")]
    MalformedPayload(String),

    #[error("run diverged at round {round}: loss = {loss}")]
    Divergence { round: u64, loss: f64 },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config file parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::NonFiniteDelta => 2,
            Error::Io { .. } => 3,
            _ => 1,
        }
    }
}
