use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate pilot at subcarrier {index} (|x| = {magnitude:e})")]
    DegeneratePilot { index: usize, magnitude: f64 },

    #[error("invalid sidelobe region: {0}")]
    InvalidRegion(String),

    #[error("degenerate mainlobe: z^H B z = {value:e} is below the admissible floor")]
    DegenerateMainlobe { value: f64 },

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Raised by the optimizer when an invariant that the algorithm
    /// guarantees is observed to fail numerically.
    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

impl Error {
    /// True for errors that originate in the solver rather than in the inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Consistency(_))
    }
}
