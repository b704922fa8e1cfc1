//! Error type shared by all modules.

use std::fmt;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix dimensions do not match the operation's requirements.
    DimensionMismatch { expected: usize, found: usize },
    /// Dimension outside the supported range (2..=64 for system use).
    DimensionOutOfRange { dim: usize },
    /// A matrix required to be Hermitian is not, within tolerance.
    NotHermitian { max_residual: f64 },
    /// A density-matrix invariant (trace, positivity, Hermiticity) failed.
    InvalidDensityMatrix { reason: String },
    /// Eigensolver did not converge or produced a non-unitary transform.
    EigensolverFailure { detail: String },
    /// A drift term had an imaginary residue above tolerance.
    ImaginaryResidue { value: f64 },
    /// Invalid parameter for a controller or observable.
    InvalidParameter { what: String },
    /// A control channel has no coupling into the target level.
    UncoupledControl { channel: usize },
    /// System fails Condition (2)/(3)-style structural requirements.
    ConditionViolation { report: String },
    /// Unknown builtin system name.
    UnknownBuiltin { name: String },
    /// State propagation produced an invalid state (NaN or invariant breach).
    NumericalFailure { detail: String },
    /// Initial sinusoidal excitation failed to leave the invariant set.
    ExcitationFailed { attempts: usize },
    /// Perturbation sampling kept breaking structural conditions.
    PerturbationRejected { attempts: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::DimensionOutOfRange { dim } => {
                write!(f, "dimension {dim} outside supported range 2..=64")
            }
            Error::NotHermitian { max_residual } => {
                write!(
                    f,
                    "matrix is not Hermitian (max |A - A^dag| = {max_residual:.3e})"
                )
            }
            Error::InvalidDensityMatrix { reason } => {
                write!(f, "invalid density matrix: {reason}")
            }
            Error::EigensolverFailure { detail } => write!(f, "eigensolver failure: {detail}"),
            Error::ImaginaryResidue { value } => {
                write!(
                    f,
                    "drift term has imaginary residue {value:.3e} above tolerance"
                )
            }
            Error::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            Error::UncoupledControl { channel } => {
                write!(f, "control channel {channel} has zero coupling column")
            }
            Error::ConditionViolation { report } => write!(f, "condition violation: {report}"),
            Error::UnknownBuiltin { name } => write!(f, "unknown builtin system `{name}`"),
            Error::NumericalFailure { detail } => write!(f, "numerical failure: {detail}"),
            Error::ExcitationFailed { attempts } => {
                write!(
                    f,
                    "initial excitation left target population zero after {attempts} attempts"
                )
            }
            Error::PerturbationRejected { attempts } => {
                write!(
                    f,
                    "perturbation sampling failed structural conditions {attempts} times"
                )
            }
        }
    }
}

impl std::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
