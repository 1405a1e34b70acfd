use thiserror::Error;

/// Errors raised by the DG toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point source location coincides with a mesh vertex.
    #[error("point x = {x} lies on the mesh skeleton (vertex {vertex} at distance {distance:e})")]
    SkeletonCollision { x: f64, vertex: usize, distance: f64 },

    /// The interior penalty form is not positive definite for this penalty.
    #[error(
        "coercivity failure for sigma0 = {sigma0}: smallest eigenvalue {lambda_min:e} <= 0; increase sigma0 (default 10 k^2)"
    )]
    CoercivityFailure { sigma0: f64, lambda_min: f64 },

    #[error("numerical rank deficiency: {0}")]
    NumericalRank(String),

    #[error("singular system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
