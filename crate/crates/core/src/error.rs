use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// A class has fewer than two samples, so its within-class Gini mean
    /// difference is undefined.
    #[error("class {class} has {size} sample(s); at least 2 are required")]
    ClassTooSmall { class: usize, size: usize },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("degenerate feature: {0}")]
    DegenerateFeature(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
