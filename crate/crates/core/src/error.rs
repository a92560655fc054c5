use thiserror::Error;

/// Errors surfaced by the numeric core.
#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation left the nonnegative domain (negative intermediate, log of a
    /// value below 1, sampling at t <= 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Weight expression text failed to parse.
    #[error("parse error at byte {offset}: expected {expected}, found {found}")]
    Parse {
        offset: usize,
        expected: String,
        found: String,
    },

    /// A problem spec failed one or more build-time validity checks.
    #[error("invalid spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    /// Two grid functions that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An argument violated a required monotonicity or positivity precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A ratio was requested against a zero or non-finite source norm.
    #[error("degenerate source norm (zero or infinite)")]
    DegenerateNorm,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
