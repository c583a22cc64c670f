use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input data.
    Data,
    /// Filesystem failure.
    Io,
    /// Socket, framing or timeout failure.
    Network,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Network {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("timed out: {0}")]
    Timeout(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid session: {}", .0.join("; "))]
    InvalidSession(Vec<String>),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("frequency {freq_hz} Hz is at or above the Nyquist limit {nyquist_hz} Hz")]
    AboveNyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("burst of {len} samples at index {start} overruns stream of {stream_len} samples")]
    BurstOverrun {
        start: usize,
        len: usize,
        stream_len: usize,
    },

    #[error("gaze direction Unknown cannot be encoded or used as a training label")]
    UnknownDirection,

    #[error("unknown event code {0}")]
    UnknownCode(u32),

    #[error("covariance is rank deficient: {0}")]
    RankDeficient(String),

    #[error("component index {index} out of range for {k} components")]
    ComponentOutOfRange { index: usize, k: usize },

    #[error("feature column '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("Kaiser criterion retained no components (largest eigenvalue {0})")]
    NoFactorsRetained(f64),

    #[error("direction {direction} has {rows} rows, at least 2 are required")]
    TooFewRows { direction: String, rows: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("channel '{0}' is not present in the recording")]
    MissingChannel(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Network { .. } | Error::Protocol(_) | Error::Timeout(_) => ErrorClass::Network,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn net(context: impl Into<String>, source: io::Error) -> Self {
        Error::Network {
            context: context.into(),
            source,
        }
    }
}
