use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("symbol argument must be nonnegative, got s = {0}")]
    NegativeSymbolArgument(f64),

    #[error("rho must lie in (0, 1], got {0}")]
    InvalidRho(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("singular part hits a grid point at the origin without mollification")]
    UnmollifiedSingularity,

    #[error("dense size {size} exceeds cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("matrix is not Hermitian: defect {0:e}")]
    NotHermitian(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("decomposition residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),

    #[error("spectral bounds do not enclose the spectrum (norm growth {0:.3e})")]
    BoundsViolation(f64),

    #[error("Chebyshev degree cap {degree} reached with coefficient tail {tail:e}")]
    DegreeCap { degree: usize, tail: f64 },

    #[error("boundary mass {mass:e} exceeds budget at t = {t}")]
    BoundaryMass { t: f64, mass: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
