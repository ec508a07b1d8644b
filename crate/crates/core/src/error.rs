use thiserror::Error;

/// Failure modes shared by every module of the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("singular channel: {0}")]
    SingularChannel(String),
    #[error("ill-conditioned matrix (condition number {condition:.3e})")]
    Conditioning { condition: f64 },
    #[error("search needs {points} candidates, above the enumeration cap of {cap}")]
    Capacity { points: u128, cap: u64 },
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures caused by numerics or search size rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Conditioning { .. } | Error::Capacity { .. } | Error::SingularChannel(_) | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
