use thiserror::Error;

/// Errors raised by the estimator and its supporting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a domain precondition (empty input, out-of-range point, bad config).
    #[error("domain error: {0}")]
    Domain(String),
    /// Dimension of an argument does not match the object it is used with.
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// Exact star discrepancy refused because the anchor grid is too large.
    #[error("exact discrepancy needs {anchors} anchors, above the guard of {guard}")]
    TooLarge { anchors: f64, guard: usize },
    /// Rejection sampling accepted too few draws inside the unit cube.
    #[error("rejection sampler accepted {accepted} of {attempts} draws")]
    LowAcceptance { accepted: usize, attempts: usize },
    /// A quantity required for a fit was degenerate (e.g. zero error in a log-log fit).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A structural invariant of a partition did not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
