use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("x = {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "trace grid too coarse for lambda = {lambda}: {points_per_wavelength:.2} points per wavelength (need {required})"
    )]
    GridTooCoarse {
        lambda: f64,
        points_per_wavelength: f64,
        required: f64,
    },

    #[error("bracket failure for eigenvalue index {index}: {reason}")]
    BracketFailure { index: usize, reason: String },

    #[error("eigenfunction {index} has {found} interior sign changes")]
    IndexMismatch { index: usize, found: usize },

    #[error("value {value} at position {position} is not an element of the reference spectrum")]
    NotSubset { position: usize, value: f64 },

    #[error("eigenvalue mismatch at position {position}: {left} vs {right}")]
    EigenvalueMismatch {
        position: usize,
        left: f64,
        right: f64,
    },

    #[error("transform tail estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}; raise z_max")]
    TailTooLarge { estimate: f64, tolerance: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),
}
