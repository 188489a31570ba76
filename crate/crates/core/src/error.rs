use thiserror::Error;

/// Errors raised by the library.
///
/// The variants line up with the CLI exit-code contract: [`Error::Capacity`]
/// and [`Error::Budget`] are guard violations (exit 3), everything else that is
/// caused by bad input is a usage/validation problem (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("node budget of {budget} exhausted after {nodes} nodes ({found} sets found so far)")]
    Budget { budget: u64, nodes: u64, found: usize },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for guard/capacity style failures.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity(_) | Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
