use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which side of the no-arbitrage band an option price fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoSolutionKind {
    BelowIntrinsic,
    AboveUpperBound,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shift domain violated: effective strike {effective_strike} must be positive")]
    ShiftDomain { effective_strike: f64 },

    #[error("no implied volatility: price {price} is {kind:?} (bound {bound})")]
    NoSolution {
        kind: NoSolutionKind,
        price: f64,
        bound: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-conditioned covariance: {0}")]
    Conditioning(String),

    #[error("unsupported correlation spec: {0}")]
    UnsupportedSpec(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("diffusion matrix not positive definite at t={t}, x=({x1}, {x2})")]
    DiffusionDegeneracy { t: f64, x1: f64, x2: f64 },

    #[error("correlation undefined: degenerate sample variance")]
    UndefinedCorrelation,

    #[error("objective dominated by Monte Carlo noise: variation {variation:.3e} < 3 x noise {noise:.3e}")]
    NoisyObjective { variation: f64, noise: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
