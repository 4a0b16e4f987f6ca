use thiserror::Error;

/// Errors raised by the library. The CLI maps these onto exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("function is not differentiable at {point:?}")]
    NotDifferentiable { point: Vec<f64> },

    #[error("function is not C2: {0}")]
    NotC2(String),

    #[error("pointwise minimum is not convex (violation {violation:e})")]
    NotConvex { violation: f64 },

    #[error("wrong representation: {0}")]
    WrongRepresentation(String),

    #[error("degenerate subdivision: {0}")]
    DegenerateSubdivision(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("affine map is singular")]
    SingularMap,

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("functional failed the homogeneity pre-check: {0}")]
    NotHomogeneous(String),

    #[error("could not make auxiliary function convex after {attempts} attempts")]
    ConvexityRepair { attempts: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
