use thiserror::Error;

/// Errors raised by the traffic models and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("{what} = {value} is outside the admissible range {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: String,
    },

    /// A road is asked to carry more than its free-phase capacity.
    #[error("flow {flow} exceeds capacity {capacity}{}", road.as_ref().map(|r| format!(" on road `{r}`")).unwrap_or_default())]
    CapacityExceeded {
        road: Option<String>,
        flow: f64,
        capacity: f64,
    },

    /// A partition does not have one share per route.
    #[error("partition has {got} shares but the network has {expected} routes")]
    PartitionMismatch { expected: usize, got: usize },

    /// Structural problem with a network, partition or scenario.
    #[error("invalid input: {0}")]
    Validation(String),

    /// Malformed scenario text, anchored at a 1-based line and column.
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A Nash test where no deviation of the requested size is admissible.
    #[error("no admissible deviation of size {epsilon}: every route share is below it")]
    DegenerateTest { epsilon: f64 },

    /// An iterative method stopped before meeting its tolerance.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
