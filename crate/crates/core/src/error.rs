use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spectral parameter {0} lies on the real axis")]
    RealAxis(Complex64),

    #[error("spectral parameter outside the admissible domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("near-singular system: |1 - m1*m2*s_max| = {0:e}")]
    NearSingular(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A hypothesis of the limit theorem is violated by the configuration.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
