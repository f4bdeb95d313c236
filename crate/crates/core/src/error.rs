use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("insufficient headroom: walk leaves the band at step {step} (bin {bin}, allowed {low}..={high})")]
    InsufficientHeadroom { step: usize, bin: i64, low: i64, high: i64 },

    #[error("degenerate series: {0}")]
    Degenerate(&'static str),

    #[error("invalid degrees of freedom estimate (kurtosis {kurtosis})")]
    InvalidDof { kurtosis: f64 },

    #[error("too few blocks: need K >= {required}, got {actual}")]
    TooFewBlocks { required: usize, actual: usize },

    #[error("empty experiment: {0}")]
    EmptyExperiment(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures that come from the data rather than the caller:
    /// degenerate statistics and undefined degrees of freedom.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::InvalidDof { .. })
    }
}
