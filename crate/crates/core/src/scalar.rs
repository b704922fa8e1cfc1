//! Scalar abstraction and numeric policy.
//!
//! All dense linear algebra in [`crate::matrix`] is generic over the real
//! scalar backing the complex entries, so the same kernels run in `f32` or
//! `f64`. The crate root exports `f64` aliases, which the physics layers use.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type backing complex matrix arithmetic: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Tolerances controlling validation and the eigensolver.
///
/// One record holds every threshold so tests pin them in a single place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy<T: Scalar> {
    /// Max entrywise |A - A^dag| for a matrix to count as Hermitian.
    pub herm_tol: T,
    /// Max ||U^dag U - I|| accepted from the matrix exponential.
    pub unitarity_tol: T,
    /// Max |tr(rho) - 1| for a density matrix.
    pub trace_tol: T,
    /// Eigenvalues of a density matrix must be >= -psd_tol.
    pub psd_tol: T,
    /// Largest dimension accepted for system matrices.
    pub max_dim: usize,
}

impl Default for NumericPolicy<f64> {
    fn default() -> Self {
        NumericPolicy {
            herm_tol: 1e-10,
            unitarity_tol: 1e-10,
            trace_tol: 1e-10,
            psd_tol: 1e-10,
            max_dim: 64,
        }
    }
}

impl Default for NumericPolicy<f32> {
    fn default() -> Self {
        NumericPolicy {
            herm_tol: 1e-4,
            unitarity_tol: 1e-4,
            trace_tol: 1e-4,
            psd_tol: 1e-4,
            max_dim: 64,
        }
    }
}
