//! Crate-wide error type.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// The CLI maps `InvalidInput`-like variants to exit code 2 (caller mistake)
/// and everything else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is out of its documented domain (non-finite,
    /// non-positive where positivity is required, malformed interval, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An environment model's parameters are inconsistent.
    #[error("invalid environment model: {0}")]
    InvalidModel(String),

    /// A wall specification is malformed (e.g. offset not bounded away from
    /// zero, table not sorted).
    #[error("invalid wall spec: {0}")]
    InvalidSpec(String),

    /// A query point lies outside a realized object's horizon or grid.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// An exhaustive computation would exceed its hard size guard.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// An event descriptor is not monotone increasing in the path.
    #[error("invalid event: {0}")]
    InvalidEvent(String),

    /// A tilt parameter lies outside the family's validated range.
    #[error("invalid tilt: {0}")]
    InvalidTilt(String),

    /// A model parameter is outside the regime the solver supports
    /// (vanishing mean reversion, too-coarse mesh, ...).
    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Two results being compared were produced under different parameters.
    #[error("mismatched parameters: {0}")]
    MismatchedParameters(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Config file parse / serialize problems.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate a caller mistake rather than an
    /// internal/numerical failure; the CLI exits 2 on these.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidModel(_)
                | Error::InvalidSpec(_)
                | Error::OutOfRange(_)
                | Error::SizeLimit(_)
                | Error::InvalidEvent(_)
                | Error::InvalidTilt(_)
                | Error::ParameterDomain(_)
                | Error::MismatchedParameters(_)
                | Error::Config(_)
        )
    }
}
