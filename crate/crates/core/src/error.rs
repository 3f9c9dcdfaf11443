use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("windowless schedule: SARRT attachment has no memory window")]
    WindowlessSchedule,

    #[error("label {label} out of range 1..={n}")]
    LabelOutOfRange { label: u64, n: u64 },

    #[error("vertex {vertex} has depth {depth}, too shallow for an extended fringe of order {k}")]
    TooShallow { vertex: u64, depth: u64, k: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("{what} did not converge after {iterations} iterations (last bracket [{lo}, {hi}])")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        lo: f64,
        hi: f64,
    },

    #[error("bracketing failed for {what}: scanned [{lo}, {hi}] without a sign change")]
    Bracketing { what: &'static str, lo: f64, hi: f64 },

    #[error(
        "thinning envelope violated at age {age}: intensity {intensity} exceeds envelope {envelope}"
    )]
    EnvelopeViolation {
        age: f64,
        intensity: f64,
        envelope: f64,
    },

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sweep interrupted after {completed} of {total} cells; resume marker at {marker}")]
    SweepInterrupted {
        completed: usize,
        total: usize,
        marker: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
