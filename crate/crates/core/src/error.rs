use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One problem found while validating a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("operation requires a {expected}D field, got {actual}D")]
    Dimension { expected: usize, actual: usize },

    #[error("vorticity is not solenoidal: max|div| = {max_div:.3e} exceeds {tolerance:.3e}")]
    NotSolenoidal { max_div: f64, tolerance: f64 },

    #[error("numerical failure at step {step} (t = {time}): {reason}")]
    Numerical { step: usize, time: f64, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("tracing failed: {0}")]
    Trace(String),

    #[error("segments are not materially linked: {0}")]
    NotLinked(String),

    #[error("invalid configuration:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Numerical failures map to exit code 1, everything caused by bad input to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::NonFinite(_) => 1,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
