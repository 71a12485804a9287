use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("corrupt record at byte {offset}: {message}")]
    CorruptRecord { offset: u64, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate entry {index}: zero magnitude")]
    DegenerateEntry { index: usize },

    #[error("invalid rescale bounds: lo = {lo}, hi = {hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("unstable AR model (reflection coefficient magnitude {0})")]
    Unstable(f64),

    #[error("no peak found in spectrum")]
    NoPeak,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("incomplete survey: reference point {rp} has no trace from access point {ap}")]
    IncompleteSurvey { rp: String, ap: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
