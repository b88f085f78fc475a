use alloc::string::String;
use core::fmt;

/// Errors raised by the sampling library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument lies outside its domain.
    Domain(String),
    /// The requested computation is not defined for the given input.
    Unsupported(String),
    /// A sampled pair of units has a zero joint inclusion probability.
    NonEstimable { k: usize, l: usize },
    /// A numerical identity that must hold was violated.
    Consistency(String),
    /// A size guard refused an enumeration that would be too large.
    TooLarge { subsets: f64, limit: f64 },
    /// A variance estimate came out negative; no interval was built.
    NegativeVariance(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Unsupported(_) => "unsupported",
            Error::NonEstimable { .. } => "non_estimable",
            Error::Consistency(_) => "consistency",
            Error::TooLarge { .. } => "too_large",
            Error::NegativeVariance(_) => "negative_variance",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::NonEstimable { k, l } => write!(
                f,
                "units {k} and {l} have zero joint inclusion probability; variance not estimable"
            ),
            Error::Consistency(msg) => write!(f, "consistency check failed: {msg}"),
            Error::TooLarge { subsets, limit } => write!(
                f,
                "enumeration would visit {subsets:.0} subsets, above the limit of {limit:.0}"
            ),
            Error::NegativeVariance(v) => write!(f, "negative variance estimate {v}"),
        }
    }
}

impl core::error::Error for Error {}
