use std::fmt;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A physical precondition was violated (non-positive pressure, negative
    /// area, pressure outside the admissible blowdown range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The search hit a NaN or infinite objective value.
    #[error("non-finite objective value at candidate area {area:e} m^2")]
    NonFiniteObjective { area: f64 },

    /// A measurement arrived with a timestamp at or before the last one
    /// already consumed by the estimator.
    #[error("out-of-order sample at t = {time} s (last accepted t = {last} s)")]
    OutOfOrderSample { time: f64, last: f64 },

    /// Configuration file problem; carries the 1-based line number.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    /// Malformed measurement data (strict ingestion mode).
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    /// Process exit code mapping used by the CLI (0 success, 2 config,
    /// 3 data, 4 io).
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. } => 2,
            Error::Data { .. } | Error::OutOfOrderSample { .. } => 3,
            Error::Io(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
