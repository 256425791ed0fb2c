use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not draw a system with nonzero spectral radius after {attempts} attempts")]
    DegenerateSystem { attempts: usize },

    #[error("matrix (I - A) is singular; no equilibrium exists for the requested input")]
    SingularEquilibrium,

    #[error("data length {actual} is shorter than the required {required} for n={n}, m={m}, L={horizon}")]
    InsufficientData {
        actual: usize,
        required: usize,
        n: usize,
        m: usize,
        horizon: usize,
    },

    #[error("dense instance with {entries} entries exceeds the guard of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("non-positive curvature {curvature:e} along a descent direction (g'p = {slope:e})")]
    DegenerateCurvature { curvature: f64, slope: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
