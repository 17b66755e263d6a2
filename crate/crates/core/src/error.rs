use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row P[{state}][{action}] is not a probability vector (sum = {sum})")]
    NonStochasticRow { state: usize, action: usize, sum: f64 },
    #[error("discount factor {0} is outside (0, 1)")]
    BadDiscount(f64),
    #[error("initial distribution is not a probability vector: {0}")]
    BadInitDist(String),
    #[error("reward r[{state}][{action}][{next}] = {value} exceeds r_max = {r_max}")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
        r_max: f64,
    },
    #[error("malformed MDP: {0}")]
    Shape(String),
    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("Markov chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error("linear system is singular: {0}")]
    SingularSystem(&'static str),
    #[error("regularization must be positive, got {0}")]
    BadLambda(f64),
    #[error("mixing constants invalid: kappa = {kappa}, rho = {rho}")]
    BadMixingConstants { kappa: f64, rho: f64 },
    #[error("non-finite iterate at step {step}")]
    NonFiniteIterate { step: usize },
    #[error("output weights are empty")]
    EmptyWeights,
    #[error("fit window holds {found} points, need at least {needed}")]
    WindowTooSmall { found: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteIterate { .. } => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
