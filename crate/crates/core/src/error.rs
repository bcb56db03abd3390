use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: String, right: String },

    #[error("operator is not Hermitian (max |M - M^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("singular reduction matrix (smallest/largest singular value {ratio:.3e})")]
    Singular { ratio: f64 },

    #[error("generator terms do not commute (max |[G_i, G_j]| = {deviation:.3e})")]
    NonCommutingGenerator { deviation: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("norm violation {deviation:.3e} exceeds limit {limit:.3e}")]
    NormViolation { deviation: f64, limit: f64 },

    #[error("no kick phase reproduces the class spectrum (best deviation {best:.3e}, limit {limit:.3e})")]
    KickCalibration { best: f64, limit: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(err: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
