use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("requested {requested} modes but only {available} are available")]
    TooManyModes { requested: usize, available: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("nonpositive eigenvalue {value} at index {index} for a nonnegative potential")]
    NonpositiveEigenvalue { index: usize, value: f64 },

    #[error("perturbation too large: rho = {rho} >= threshold {threshold}")]
    PerturbationTooLarge { rho: f64, threshold: f64 },

    #[error("eigenvalue pairing ambiguous at k = {k}: {detail}")]
    PairingAmbiguity { k: i64, detail: String },

    #[error("eigenvector matrix is numerically defective (smallest singular value {sigma_min:e})")]
    Defective { sigma_min: f64 },

    #[error("modulation is not invertible: lambda(0) = 0")]
    NotInvertible,

    #[error("normal system is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("Gram matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimates {history:?})")]
    NonConvergence { iterations: usize, history: Vec<f64> },

    #[error("missing probes for k = {0:?}")]
    MissingProbes(Vec<i64>),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
