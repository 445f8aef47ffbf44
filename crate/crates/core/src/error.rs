use thiserror::Error;

/// Failures surfaced by the toolkit. Validation problems map to CLI exit code 1,
/// numerical breakdowns to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("right-hand side is not orthogonal to the collision invariants (defect {defect:.3e})")]
    NotOrthogonal { defect: f64 },

    #[error("precondition violated: {what} (defect {defect:.3e})")]
    Precondition { what: String, defect: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("branch tracking failed at radius {radius}: {detail}")]
    BranchTracking { radius: f64, detail: String },

    #[error("non-finite values in mode {mode} at t = {time}")]
    NonFinite { mode: usize, time: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::BranchTracking { .. } | Error::NonFinite { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
