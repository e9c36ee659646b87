use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bin count {n}: need at least {min}")]
    InvalidBinCount { n: usize, min: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("strategy picked empty bin {bin}")]
    EmptyBinPicked { bin: usize },

    #[error("all bins are empty")]
    AllBinsEmpty,

    #[error("bin {bin} holds balls but has probability zero")]
    ZeroProbabilityOccupied { bin: usize },

    #[error("bin {bin} has probability zero")]
    ZeroProbabilityBin { bin: usize },

    #[error("frequency of bin {bin} is zero but its weight is positive")]
    ZeroFrequencyPositiveWeight { bin: usize },

    #[error("state space has {states} states, cap is {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },

    #[error("flow equation only holds for stateless strategies, got {0}")]
    StatefulStrategy(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("spacing offset {b} must be below point count {len}")]
    BTooLarge { b: usize, len: usize },

    #[error("flush requested on an empty buffer")]
    EmptyBuffer,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
