use thiserror::Error;

/// Errors raised by the simulation library.
///
/// Agent indices carried by variants are 1-based, matching how agents are
/// numbered in configs, traces and metrics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid utility distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("agent {agent} has a continuous utility distribution; use Monte-Carlo fair shares")]
    ContinuousSupport { agent: usize },

    #[error("report {value} from agent {agent} is outside [0, 1]")]
    ReportOutOfRange { agent: usize, value: f64 },

    #[error("agent {agent} is eliminated but submitted a report")]
    ReportFromEliminatedAgent { agent: usize },

    #[error("alive agent {agent} did not submit a report")]
    MissingReport { agent: usize },

    #[error("agent {agent} marked up in round {round} while its threshold probability was {threshold} <= 1")]
    RestrictedMarkUp { agent: usize, round: u64, threshold: f64 },

    #[error("round {round} is past the horizon {horizon}")]
    HorizonExceeded { round: u64, horizon: u64 },

    #[error("expected {expected} entries, got {actual}: {what}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("replay diverged at round {round}: {what}")]
    ReplayMismatch { round: u64, what: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
