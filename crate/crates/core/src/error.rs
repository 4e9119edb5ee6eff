use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("too many sites for sector enumeration: {sites} (max {max})")]
    TooManySites { sites: usize, max: usize },

    #[error("projector construction failed: {0}")]
    Projector(String),

    #[error("contraction of {entries} amplitudes exceeds the memory budget of {budget}")]
    ContractionBudget { entries: usize, budget: usize },

    #[error("dense eigendecomposition failed: {0}")]
    DenseEigen(String),

    #[error("kernel construction failed: {0}")]
    Kernel(String),

    #[error("deflation basis is not orthonormal (Gram deviation {deviation:.3e})")]
    DeflationNotOrthonormal { deviation: f64 },

    #[error("Lanczos did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    NotConverged { iterations: usize, best_residual: f64 },

    #[error("cannot assign a total spin to <S^2> = {s2} (nearest J = {nearest}, deviation {deviation:.3e})")]
    AmbiguousSpin { s2: f64, nearest: f64, deviation: f64 },

    #[error("sector 2m = {two_m}: {source}")]
    Sector {
        two_m: i32,
        #[source]
        source: Box<Error>,
    },

    #[error("cover count mismatch: {0}")]
    CoverMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_sector(self, two_m: i32) -> Self {
        Error::Sector {
            two_m,
            source: Box::new(self),
        }
    }
}
