use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no admissible delay weight xi: {0}")]
    NoAdmissibleXi(String),

    #[error("xi = {xi} lies outside the admissible interval [{low}, {high}]")]
    XiOutsideInterval { xi: f64, low: f64, high: f64 },

    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("matrix dimension {dim} exceeds dense cap {cap}; reduce n_cells or n_rho")]
    OverDenseCap { dim: usize, cap: usize },

    #[error("initial data incompatible with u(0) = 0: u0(0) = {0}")]
    DirichletIncompatible(f64),

    #[error("decay fit: {0}")]
    Fit(String),

    #[error("epsilon search failed: {0}")]
    EpsilonSearch(String),

    #[error("invalid sweep plan: {0}")]
    Plan(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
