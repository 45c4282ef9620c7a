use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (shape, range, sign).
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced or received a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The iterative barycenter oracle hit its iteration cap.
    #[error("oracle did not converge after {iterations} iterations (objective {objective:e})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        best: Vec<f64>,
    },

    /// Invalid experiment spec, trainer config or CLI argument.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
