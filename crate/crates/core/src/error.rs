use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter point (or a point the computation needs) lies outside the model's open domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed; `residual` carries the best available error estimate
    /// or best-found value.
    #[error("numerics error: {message} (residual {residual:e})")]
    Numerics { message: String, residual: f64 },

    /// Dimension or symmetry mismatch between inputs.
    #[error("shape error: {0}")]
    Shape(String),

    /// A caller-side contract was violated (bad argument, degenerate input).
    #[error("contract error: {0}")]
    Contract(String),

    /// Failure while evaluating a prior grid, pinned to the offending node.
    #[error("at grid node {index} {coords:?}: {source}")]
    AtGridNode {
        index: usize,
        coords: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn numerics(message: impl Into<String>, residual: f64) -> Self {
        Error::Numerics {
            message: message.into(),
            residual,
        }
    }

    /// The innermost error, looking through grid-node wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGridNode { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
