use alloc::string::String;
use core::fmt;

/// Errors raised by the core algebra, geometry and training code.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An evidence component was negative or not finite.
    InvalidEvidence { index: usize, value: f64 },
    /// A probability fell outside the admissible open or closed interval.
    ProbabilityOutOfRange(f64),
    /// Percentile outside (0, 100].
    InvalidPercentile(f64),
    /// A reduction over an empty sample set.
    EmptySamples,
    /// Dempster's rule is undefined when the two masses fully contradict.
    TotalConflict,
    /// Dimensions or class counts that do not agree.
    Shape(String),
    /// A configuration value violates its invariant.
    Config(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize, step: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidEvidence { index, value } => {
                write!(f, "evidence component {index} is invalid: {value}")
            }
            Error::ProbabilityOutOfRange(p) => write!(f, "probability out of range: {p}"),
            Error::InvalidPercentile(n) => write!(f, "percentile must lie in (0, 100], got {n}"),
            Error::EmptySamples => f.write_str("cannot reduce an empty sample set"),
            Error::TotalConflict => f.write_str("total conflict between belief masses"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Divergence { epoch, step } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}, step {step}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
