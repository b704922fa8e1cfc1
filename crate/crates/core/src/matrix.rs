//! Dense complex matrix arithmetic for small quantum systems.
//!
//! Everything here is sized for desk-scale dimensions (N <= 64, and N <= 4 in
//! practice): row-major storage, cyclic Jacobi eigendecomposition for
//! Hermitian matrices, and an exactly-unitary matrix exponential built on it.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{NumericPolicy, Scalar};

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T: Scalar> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    /// Zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![Complex::zero(); dim * dim],
        }
    }

    /// Identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            m[(j, j)] = Complex::one();
        }
        m
    }

    /// Build from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(ComplexMatrix { dim, data })
    }

    /// Build from real-valued rows.
    pub fn from_real_rows(rows: &[Vec<T>]) -> Result<Self> {
        let complex_rows: Vec<Vec<Complex<T>>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex::new(x, T::zero())).collect())
            .collect();
        Self::from_rows(&complex_rows)
    }

    /// Diagonal matrix from real entries.
    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (j, &d) in diag.iter().enumerate() {
            m[(j, j)] = Complex::new(d, T::zero());
        }
        m
    }

    /// Rank-one projector |j><j|.
    pub fn basis_projector(dim: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(j, j)] = Complex::one();
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == Complex::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexMatrix {
            dim: self.dim,
            data,
        })
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ComplexMatrix {
            dim: self.dim,
            data,
        })
    }

    /// Scale by a real factor.
    pub fn scale(&self, factor: T) -> Self {
        let f = Complex::new(factor, T::zero());
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * f).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim)
            .map(|j| self[(j, j)])
            .fold(Complex::zero(), |acc, x| acc + x)
    }

    /// Max entrywise |A - A^dag|.
    pub fn hermiticity_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// Symmetrized copy (A + A^dag) / 2; exact for Hermitian input.
    pub fn hermitized(&self) -> Self {
        let n = self.dim;
        let half = T::from_f64(0.5).unwrap();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()).scale(half);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Max entrywise |A - B| over both matrices.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
    }

    /// Kronecker product, used to assemble multi-qubit Hamiltonians.
    pub fn kron(&self, other: &Self) -> Self {
        let n = self.dim;
        let m = other.dim;
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a == Complex::zero() {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    fn has_nan(&self) -> bool {
        self.data.iter().any(|z| z.re.is_nan() || z.im.is_nan())
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.dim + j]
    }
}

/// Real eigenvalues sorted nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Max entrywise distance between two sorted spectra.
    pub fn max_abs_diff(&self, other: &Spectrum<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
    }
}

/// Eigendecomposition of a Hermitian matrix: A = Q diag(values) Q^dag.
///
/// Eigenvalues are sorted nonincreasing; `vectors` holds the matching
/// eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Scalar> {
    pub values: Vec<T>,
    pub vectors: ComplexMatrix<T>,
}

/// Cyclic Jacobi eigendecomposition for Hermitian matrices.
///
/// Quadratically convergent for the small dimensions used here, and the
/// accumulated `Q` is unitary to machine precision, which is what makes the
/// exponential-based propagation spectrum-preserving.
pub fn eigh<T: Scalar>(
    a: &ComplexMatrix<T>,
    policy: &NumericPolicy<T>,
) -> Result<HermitianEigen<T>> {
    let res = a.hermiticity_residual();
    if res > policy.herm_tol {
        return Err(Error::NotHermitian {
            max_residual: res.to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = a.dim();
    let mut m = a.hermitized();
    let mut q = ComplexMatrix::identity(n);

    let scale = m.frobenius_norm().max(T::one());
    let off_tol = scale * T::epsilon() * T::from_usize(n).unwrap();
    let max_sweeps = 64;

    for _sweep in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= off_tol {
            break;
        }
        for p in 0..n {
            for qq in (p + 1)..n {
                let b = m[(p, qq)];
                let alpha = b.norm();
                if alpha <= scale * T::epsilon() {
                    continue;
                }
                let u = b / Complex::new(alpha, T::zero());
                let app = m[(p, p)].re;
                let aqq = m[(qq, qq)].re;
                let two = T::from_f64(2.0).unwrap();
                let tau = (aqq - app) / (two * alpha);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let cs = Complex::new(c, T::zero());
                let ss = Complex::new(s, T::zero());
                // A <- A J (columns p, qq), then A <- J^dag A (rows p, qq),
                // with J[p][p]=c, J[p][qq]=s, J[qq][p]=-s u*, J[qq][qq]=c u*.
                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, qq)];
                    m[(i, p)] = aip * cs - aiq * ss * u.conj();
                    m[(i, qq)] = aip * ss + aiq * cs * u.conj();
                }
                for j in 0..n {
                    let apj = m[(p, j)];
                    let aqj = m[(qq, j)];
                    m[(p, j)] = apj * cs - aqj * ss * u;
                    m[(qq, j)] = apj * ss + aqj * cs * u;
                }
                for i in 0..n {
                    let qip = q[(i, p)];
                    let qiq = q[(i, qq)];
                    q[(i, p)] = qip * cs - qiq * ss * u.conj();
                    q[(i, qq)] = qip * ss + qiq * cs * u.conj();
                }
            }
        }
    }

    let mut off = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            off += m[(i, j)].norm_sqr();
        }
    }
    if off.sqrt() > off_tol * T::from_f64(1e3).unwrap() {
        return Err(Error::EigensolverFailure {
            detail: format!(
                "Jacobi sweep stalled with off-diagonal norm {:e}",
                off.sqrt().to_f64().unwrap_or(f64::NAN)
            ),
        });
    }

    // Sort nonincreasing, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|j| m[(j, j)].re).collect();
    order.sort_by(|&i, &j| {
        diag[j]
            .partial_cmp(&diag[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<T> = order.iter().map(|&j| diag[j]).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (newcol, &oldcol) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, newcol)] = q[(i, oldcol)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Commutator [A, B] = AB - BA.
///
/// Anti-Hermitian whenever both arguments are Hermitian.
pub fn commutator<T: Scalar>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    a.mul(b)?.sub(&b.mul(a)?)
}

/// Unitary propagator U = exp(-i H t) for Hermitian H, via eigendecomposition.
///
/// The result is unitary up to eigensolver accuracy, which keeps repeated
/// propagation on the isospectral manifold.
pub fn matrix_exp_skewh<T: Scalar>(
    h: &ComplexMatrix<T>,
    t: T,
    policy: &NumericPolicy<T>,
) -> Result<ComplexMatrix<T>> {
    let eig = eigh(h, policy)?;
    let u = unitary_from_eigen(&eig, t);
    let n = h.dim();
    let gram = u.adjoint().mul(&u)?;
    let dev = gram.max_abs_diff(&ComplexMatrix::identity(n));
    if dev > policy.unitarity_tol {
        return Err(Error::EigensolverFailure {
            detail: format!(
                "propagator unitarity residual {:e}",
                dev.to_f64().unwrap_or(f64::NAN)
            ),
        });
    }
    Ok(u)
}

/// U = Q diag(e^{-i lambda_j t}) Q^dag from a cached eigendecomposition.
pub fn unitary_from_eigen<T: Scalar>(eig: &HermitianEigen<T>, t: T) -> ComplexMatrix<T> {
    let n = eig.values.len();
    let q = &eig.vectors;
    let mut out = ComplexMatrix::zeros(n);
    // Q * diag(phase) * Q^dag without forming the middle factor.
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::zero();
            for k in 0..n {
                let angle = eig.values[k] * t;
                let phase = Complex::new(angle.cos(), -angle.sin());
                acc += q[(i, k)] * phase * q[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Real eigenvalues of a Hermitian matrix, sorted nonincreasing.
pub fn spectrum<T: Scalar>(a: &ComplexMatrix<T>, policy: &NumericPolicy<T>) -> Result<Spectrum<T>> {
    let eig = eigh(a, policy)?;
    Ok(Spectrum { values: eig.values })
}

/// Induced 2-norm (largest singular value), via the Hermitian A^dag A.
pub fn spectral_norm<T: Scalar>(a: &ComplexMatrix<T>) -> T {
    let gram = a.adjoint().mul(a).expect("square matrices");
    // Gram matrix is Hermitian by construction; use a permissive policy.
    let policy = NumericPolicy {
        herm_tol: gram.frobenius_norm().max(T::one()) * T::epsilon() * T::from_f64(64.0).unwrap(),
        unitarity_tol: T::one(),
        trace_tol: T::one(),
        psd_tol: T::one(),
        max_dim: usize::MAX,
    };
    let eig = eigh(&gram, &policy).expect("gram matrix eigendecomposition");
    let top = eig.values.first().copied().unwrap_or(T::zero());
    top.max(T::zero()).sqrt()
}

/// Hermitian, positive semidefinite, unit-trace state matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Scalar> {
    mat: ComplexMatrix<T>,
}

impl<T: Scalar> DensityMatrix<T> {
    /// Validate all invariants and wrap.
    pub fn new(mat: ComplexMatrix<T>, policy: &NumericPolicy<T>) -> Result<Self> {
        if mat.dim() > policy.max_dim {
            return Err(Error::DimensionOutOfRange { dim: mat.dim() });
        }
        if mat.has_nan() {
            return Err(Error::InvalidDensityMatrix {
                reason: "NaN entry".into(),
            });
        }
        let herm = mat.hermiticity_residual();
        if herm > policy.herm_tol {
            return Err(Error::InvalidDensityMatrix {
                reason: format!(
                    "Hermiticity residual {:e}",
                    herm.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }
        let tr = mat.trace();
        let tr_dev = (tr.re - T::one()).abs().max(tr.im.abs());
        if tr_dev > policy.trace_tol {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("trace deviation {:e}", tr_dev.to_f64().unwrap_or(f64::NAN)),
            });
        }
        let eig = eigh(&mat, policy)?;
        if let Some(&lo) = eig.values.last() {
            if lo < -policy.psd_tol {
                return Err(Error::InvalidDensityMatrix {
                    reason: format!("negative eigenvalue {:e}", lo.to_f64().unwrap_or(f64::NAN)),
                });
            }
        }
        Ok(DensityMatrix { mat })
    }

    /// |psi><psi| from a state vector, normalized first.
    pub fn pure_state(amplitudes: &[Complex<T>], policy: &NumericPolicy<T>) -> Result<Self> {
        let norm_sq = amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b);
        if norm_sq <= T::zero() {
            return Err(Error::InvalidDensityMatrix {
                reason: "zero state vector".into(),
            });
        }
        let n = amplitudes.len();
        let mut mat = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] =
                    amplitudes[i] * amplitudes[j].conj() / Complex::new(norm_sq, T::zero());
            }
        }
        Self::new(mat, policy)
    }

    /// The eigenstate projector |j><j| of a diagonal internal Hamiltonian.
    pub fn eigenstate(dim: usize, j: usize, policy: &NumericPolicy<T>) -> Result<Self> {
        if j >= dim {
            return Err(Error::InvalidParameter {
                what: format!("eigenstate index {j} for dim {dim}"),
            });
        }
        Self::new(ComplexMatrix::basis_projector(dim, j), policy)
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        self.mat[(i, j)]
    }

    /// Level population <j|rho|j>.
    pub fn population(&self, j: usize) -> T {
        self.mat[(j, j)].re
    }

    /// tr(rho^2); equals 1 exactly for pure states.
    pub fn purity(&self) -> T {
        let sq = self.mat.mul(&self.mat).expect("square");
        sq.trace().re
    }
}

/// Overlap tr(rho rho_f) with a pure target; the target-level population when
/// the target is an eigenstate projector.
pub fn fidelity<T: Scalar>(rho: &DensityMatrix<T>, target: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: target.dim(),
        });
    }
    let prod = rho.matrix().mul(target.matrix())?;
    let tr = prod.trace();
    let tol = T::from_f64(1e-10).unwrap();
    if tr.im.abs() > tol {
        return Err(Error::ImaginaryResidue {
            value: tr.im.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(tr.re.max(T::zero()).min(T::one()))
}
