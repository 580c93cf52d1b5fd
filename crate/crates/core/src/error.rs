use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (dimensions, ranges, set membership).
    #[error("usage error: {0}")]
    Usage(String),

    /// A computation would exceed its configured size budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("pair (A, B) is not stabilizable: {0}")]
    Stabilizability(String),

    /// Iterative numerics failed to converge or produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    /// The grid-based certification could not produce valid levels.
    #[error("certification failed: {0}")]
    Certification(String),

    /// A certified condition did not hold at run time.
    #[error("certificate violated: {0}")]
    CertificateViolation(String),

    /// Malformed on-disk artifact.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
