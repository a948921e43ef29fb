use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("volume mismatch: recorded {recorded}, measured {measured}")]
    VolumeMismatch { recorded: f64, measured: f64 },
    #[error("combinatorial budget exceeded: {0} configurations")]
    BudgetExceeded(u64),
    #[error("degenerate set: {0}")]
    Degenerate(String),
    #[error("ray extraction did not converge: {0}")]
    NonConvergence(String),
    #[error("degenerate ray: {0}")]
    DegenerateRay(String),
    #[error("no triples at distance threshold {0}")]
    NoTriples(f64),
    #[error("degenerate ball: {0}")]
    DegenerateBall(String),
    #[error("overlap: {0}")]
    Overlap(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegenerateDomain(_) => "degenerate-domain",
            Error::OutOfDomain(_) => "out-of-domain",
            Error::VolumeMismatch { .. } => "volume-mismatch",
            Error::BudgetExceeded(_) => "budget-exceeded",
            Error::Degenerate(_) => "degenerate",
            Error::NonConvergence(_) => "non-convergence",
            Error::DegenerateRay(_) => "degenerate-ray",
            Error::NoTriples(_) => "no-triples",
            Error::DegenerateBall(_) => "degenerate-ball",
            Error::Overlap(_) => "overlap",
            Error::InvalidSpace(_) => "invalid-space",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
