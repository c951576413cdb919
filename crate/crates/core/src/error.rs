use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("channel is not ({epsilon}, {delta})-private: tightest delta at this epsilon is {actual}")]
    NotApproximatelyPrivate {
        epsilon: f64,
        delta: f64,
        actual: f64,
    },

    /// No epsilon-pure channel lies within the requested total-variation
    /// radius of the input. `achievable` is the smallest max-row distance
    /// found by the linear program.
    #[error("no {epsilon}-pure channel within TV {bound}; smallest achievable max-row TV is {achievable}")]
    TvBoundUnattainable {
        epsilon: f64,
        bound: f64,
        achievable: f64,
    },

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("instance too large: {atoms} atoms exceeds limit {limit}")]
    TooLarge { atoms: u128, limit: u128 },

    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
