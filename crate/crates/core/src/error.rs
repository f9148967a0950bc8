use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel {channel} has zero standard deviation")]
    ConstantChannel { channel: usize },

    #[error("log of length {len} is too short, need at least {needed} samples")]
    LogTooShort { len: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sweep end frequency {f1} Hz violates Nyquist limit {nyquist} Hz")]
    NyquistViolation { f1: f64, nyquist: f64 },

    #[error("surrogate state norm {norm:.3e} exceeded bound at step {step}")]
    NumericalBlowup { step: usize, norm: f64 },

    #[error("cannot fill {k} balanced clusters from {n} points")]
    EmptyClusterUnrecoverable { k: usize, n: usize },

    #[error("covariance is rank deficient (smallest eigenvalue {min_eig:.3e})")]
    RankDeficient { min_eig: f64 },

    #[error("trend design matrix is singular")]
    SingularDesign,

    #[error("saddle-point matrix is singular (duplicate coordinates or rank-deficient constraints)")]
    SingularKkt,

    #[error("symmetric eigendecomposition failed")]
    EigenFailure,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("true value too close to zero at step {step}")]
    ZeroTruth { step: usize },

    #[error("no sign pattern produced a certified optimum")]
    NoValidPattern,

    #[error("K-ADMM did not converge within {iterations} iterations")]
    SolverDidNotConverge { iterations: usize },

    #[error("zone {zone}: {source}")]
    Zone {
        zone: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_zone(self, zone: usize) -> Self {
        Error::Zone {
            zone,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping zone annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Zone { source, .. } => source.root(),
            other => other,
        }
    }
}
