use angloc_core::Error as CoreError;
use serde::Serialize;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit status reported by the `angloc` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Usage,
    Data,
    Numeric,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Usage => 1,
            ExitKind::Data => 2,
            ExitKind::Numeric => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Reclassifies invalid user-supplied descriptions (scenes, configs) as
    /// configuration errors.
    pub fn into_config(self) -> Self {
        match self {
            CliError::Core {
                context,
                source: CoreError::InvalidInput(m),
            } => CliError::Core {
                context,
                source: CoreError::InvalidConfig(m),
            },
            CliError::Json { context, source } => CliError::Usage(format!("{context}: {source}")),
            other => other,
        }
    }

    pub fn kind(&self) -> ExitKind {
        match self {
            CliError::Usage(_) => ExitKind::Usage,
            CliError::Io { .. } | CliError::Json { .. } => ExitKind::Data,
            CliError::Core { source, .. } => match source {
                CoreError::InvalidConfig(_) => ExitKind::Usage,
                CoreError::Degenerate(_)
                | CoreError::DegenerateEntry { .. }
                | CoreError::Unstable(_)
                | CoreError::NoPeak
                | CoreError::Numeric(_) => ExitKind::Numeric,
                _ => ExitKind::Data,
            },
        }
    }

    /// The structured error written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
            },
            "exit_code": self.kind().code(),
        })
    }
}

/// Attaches a human-readable context to fallible calls.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for angloc_core::Result<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Core {
            context: what.into(),
            source,
        })
    }
}

impl<T> Context<T> for std::io::Result<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Io {
            context: what.into(),
            source,
        })
    }
}

impl<T> Context<T> for serde_json::Result<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Json {
            context: what.into(),
            source,
        })
    }
}
