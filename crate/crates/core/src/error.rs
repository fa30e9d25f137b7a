use thiserror::Error;

/// Errors produced by the library. Each variant maps onto one CLI exit class.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed on-disk input. `line` is 1-based when known.
    #[error("format error{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, message: String },

    /// Well-formed input that violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested computation exceeds a configured size limit.
    #[error("resource limit exceeded: {0}")]
    Budget(String),

    /// An internal consistency check failed.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn format(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Error::Input(message.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::Input(_) => 2,
            Error::Budget(_) => 3,
            Error::Invariant(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
