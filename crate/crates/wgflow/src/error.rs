//! Error type shared by all modules of the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An ensemble is too small or has collapsed onto a single point.
    DegenerateEnsemble(&'static str),
    /// Two objects that must share a dimension do not.
    DimensionMismatch { expected: usize, found: usize },
    /// Two ensembles that must share a particle count do not.
    SizeMismatch { expected: usize, found: usize },
    /// Every kernel value underflowed at the given evaluation point.
    FarField { point: usize },
    /// A matrix that must be symmetric positive definite is not.
    NotPositiveDefinite,
    /// A linear system stayed singular even at the strongest regularisation.
    SingularSystem,
    /// An eigenvalue iteration failed to converge.
    EigenNoConvergence,
    /// An input left the domain of a forward model.
    Domain(&'static str),
    /// A forward model hit a removable singularity.
    Singularity(&'static str),
    /// A particle update produced a non-finite coordinate.
    Divergence { iteration: usize },
    /// A forward-model evaluation failed at one particle.
    ModelEvaluation { iteration: usize, particle: usize },
    /// A value that must be finite is not, or a config field is out of range.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegenerateEnsemble(what) => write!(f, "degenerate ensemble: {what}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::SizeMismatch { expected, found } => {
                write!(
                    f,
                    "size mismatch: expected {expected} particles, found {found}"
                )
            }
            Error::FarField { point } => {
                write!(
                    f,
                    "all kernel values underflowed at evaluation point {point}"
                )
            }
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::SingularSystem => write!(f, "linear system is singular"),
            Error::EigenNoConvergence => write!(f, "eigenvalue iteration did not converge"),
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::Singularity(what) => write!(f, "singular model evaluation: {what}"),
            Error::Divergence { iteration } => {
                write!(f, "non-finite particle update at iteration {iteration}")
            }
            Error::ModelEvaluation {
                iteration,
                particle,
            } => write!(
                f,
                "forward model failed at iteration {iteration}, particle {particle}"
            ),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
