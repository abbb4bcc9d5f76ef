use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("zero vector has no normalized state")]
    ZeroVector,

    #[error("{what} is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { what: String, deviation: f64 },

    #[error("{what} is not unitary (deviation {deviation:.3e})")]
    NotUnitary { what: String, deviation: f64 },

    #[error("density operator is not positive (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("density operator trace {trace:.12} differs from 1")]
    NotNormalized { trace: f64 },

    #[error("matrix is not an X state (off-X entry modulus {offending:.3e})")]
    NotXState { offending: f64 },

    #[error("detection operator {channel} is not local on either qubit")]
    NonLocalDetection { channel: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trace drift {drift:.3e} at t = {t}; reduce dt")]
    TraceDrift { t: f64, drift: f64 },

    #[error("all trajectory weights underflowed; use the physical (P) measure")]
    WeightsUnderflow,

    #[error("model file: {0}")]
    ModelFile(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::TraceDrift { .. } | Error::WeightsUnderflow)
    }
}
