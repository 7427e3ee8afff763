use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level t = {level} is not inside the smooth neighbourhood (tau = {tau})")]
    LevelOutOfRange { level: f64, tau: f64 },

    #[error("|p| = {radius} outside the tabulated range [{min}, {max}]")]
    OutOfRange { radius: f64, min: f64, max: f64 },

    /// The Birman-Schwinger eigenvalue never reaches 1: there is no such bound state.
    #[error("no bound state with index {index} at lambda = {lambda}")]
    NoBoundState { lambda: f64, index: usize },

    /// A quantity exists but lies outside what the current discretisation resolves.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("Neumann series for (1 + lambda M_e)^-1 diverges (term norm ratio {ratio:.3})")]
    NeumannDivergence { ratio: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("eigendecomposition failed to converge")]
    Eigen,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
