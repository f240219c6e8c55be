use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series metadata mismatch: {0}")]
    MetaMismatch(String),

    #[error("invalid term: {0}")]
    InvalidTerm(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("series is not homogeneous: found z-degrees {0:?}")]
    NotHomogeneous(Vec<u32>),

    #[error("input is not a pure Fourier series in x")]
    NotPureFourier,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("generator has terms of degree <= 2; the Lie series would not terminate under the degree cap")]
    NonTerminating,

    #[error("Lie series did not converge after {iterations} brackets (last increment mass {last_mass:e})")]
    NotConverged { iterations: usize, last_mass: f64 },

    #[error(
        "divisor collapse: {count} low-order terms are resonant (smallest |D| = {min_divisor:e})"
    )]
    DivisorCollapse { count: usize, min_divisor: f64 },

    #[error("point left the domain: {0}")]
    OutsideDomain(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}
