use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular: pivot magnitude {pivot:e} below tolerance {tol:e}")]
    SingularMatrix { pivot: f64, tol: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("argument {value} outside the domain of {function}")]
    DomainError { function: &'static str, value: f64 },

    #[error("sector angle {theta} is not in (pi/2, pi)")]
    InvalidAngle { theta: f64 },

    #[error("contour node {node} lies (numerically) in the spectrum")]
    ContourThroughSpectrum { node: String },

    #[error("ray truncation at R = {cutoff} leaves an estimated tail of {estimate:e} > {tol:e}")]
    TruncationTooCoarse { cutoff: f64, estimate: f64, tol: f64 },

    #[error("|z| = {modulus} exceeds the series radius {radius}")]
    RadiusExceeded { modulus: f64, radius: f64 },

    #[error("grid is not uniform (step {index} differs from the first step)")]
    NonUniformGrid { index: usize },

    #[error("grid has {len} points, at least {min} required")]
    GridTooShort { len: usize, min: usize },

    #[error("t_star = {t_star} is not strictly below the common existence floor {omega_floor}")]
    CommonIntervalViolated { t_star: f64, omega_floor: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
