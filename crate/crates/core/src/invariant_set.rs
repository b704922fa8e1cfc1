//! LaSalle invariant-set machinery.
//!
//! The limit set of the controlled dynamics is characterized by a finite set
//! of moment conditions on the coupled coherences: even frequency powers
//! annihilate the imaginary parts and odd powers the real parts, alongside a
//! spectrum match with the initial state. This module assembles those
//! matrices, evaluates membership residuals, and classifies the invariant
//! set when the observable isolates the target.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lyapunov::LyapunovObservable;
use crate::matrix::{spectrum, Spectrum};
use crate::model::{check_conditions, QuantumSystem, DEGENERACY_TOL};
use crate::scalar::NumericPolicy;
use crate::{Density, C64};

/// Default residual tolerance for membership, separate from the simulation
/// tolerances.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Assembled moment matrices for one (system, observable) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSetData {
    /// FN = N(N-1) - 2, the highest even frequency power used.
    pub fn_degree: usize,
    /// Rows are frequency powers n = 0, 2, ..., FN; columns follow
    /// `pair_order`.
    pub m_matrix: Vec<Vec<f64>>,
    /// omega_jl per pair.
    pub omega: Vec<f64>,
    /// p_l - p_j per pair.
    pub p_diff: Vec<f64>,
    /// Off-diagonal pairs (j, l), j < l, in lexicographic order.
    pub pair_order: Vec<(usize, usize)>,
}

/// Build the moment matrices for a system and observable.
pub fn build_invariant_data(sys: &QuantumSystem, obs: &LyapunovObservable) -> InvariantSetData {
    let n = sys.dim();
    let fn_degree = n * (n - 1) - 2;
    let mut pair_order = Vec::new();
    for j in 0..n {
        for l in (j + 1)..n {
            pair_order.push((j, l));
        }
    }
    let omega: Vec<f64> = pair_order
        .iter()
        .map(|&(j, l)| sys.transition_frequency(j, l))
        .collect();
    let p = obs.p_diag();
    let p_diff: Vec<f64> = pair_order.iter().map(|&(j, l)| p[l] - p[j]).collect();
    let rows = fn_degree / 2 + 1;
    let mut m_matrix = Vec::with_capacity(rows);
    for r in 0..rows {
        let power = 2 * r as i32;
        m_matrix.push(omega.iter().map(|w| w.powi(power)).collect());
    }
    InvariantSetData {
        fn_degree,
        m_matrix,
        omega,
        p_diff,
        pair_order,
    }
}

/// Coupled coherence vector: entry (j, l) is (H_k)_{jl} rho_{lj}.
pub fn xi_vector(sys: &QuantumSystem, rho: &Density, k: usize) -> Vec<C64> {
    let hk = &sys.controls()[k].hamiltonian;
    let n = sys.dim();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for l in (j + 1)..n {
            out.push(hk[(j, l)] * rho.entry(l, j));
        }
    }
    out
}

/// Residuals of the invariant-set membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    pub in_set: bool,
    /// Max over channels of the even-moment residual on Im(xi_k).
    pub residual_im: f64,
    /// Max over channels of the odd-moment residual on Re(xi_k).
    pub residual_re: f64,
    pub spectrum_match: bool,
}

/// Test whether a state sits in the invariant set of trajectories started
/// with the given spectrum.
///
/// Frequency powers are evaluated on omega / max(1, max |omega|): one global
/// scale bounds every matrix entry by one without collapsing distinct
/// frequencies, and residual tolerances apply after that scaling.
pub fn membership(
    sys: &QuantumSystem,
    obs: &LyapunovObservable,
    initial_spectrum: &Spectrum<f64>,
    rho_bar: &Density,
    tol: f64,
) -> Result<MembershipReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("membership tolerance {tol}"),
        });
    }
    let policy = NumericPolicy::<f64>::default();
    let data = build_invariant_data(sys, obs);
    let spec_bar = spectrum(rho_bar.matrix(), &policy)?;
    let spectrum_match = spec_bar.max_abs_diff(initial_spectrum) <= tol;

    let pairs = data.pair_order.len();
    let even_rows = data.fn_degree / 2 + 1;
    // scaled frequency nodes keep the high powers conditioned
    let scale = data.omega.iter().fold(1.0f64, |a, w| a.max(w.abs()));
    let nodes: Vec<f64> = data.omega.iter().map(|w| w / scale).collect();

    let mut residual_im = 0.0f64;
    let mut residual_re = 0.0f64;
    for k in 0..sys.num_controls() {
        let xi = xi_vector(sys, rho_bar, k);
        let weighted: Vec<C64> = xi
            .iter()
            .zip(&data.p_diff)
            .map(|(x, &pd)| x * Complex::new(pd, 0.0))
            .collect();
        let mut acc_im = 0.0f64;
        let mut acc_re = 0.0f64;
        for r in 0..even_rows {
            let mut row_im = 0.0;
            let mut row_re = 0.0;
            for c in 0..pairs {
                let even = nodes[c].powi(2 * r as i32);
                let odd = even * nodes[c];
                row_im += even * weighted[c].im;
                row_re += odd * weighted[c].re;
            }
            acc_im += row_im * row_im;
            acc_re += row_re * row_re;
        }
        residual_im = residual_im.max(acc_im.sqrt());
        residual_re = residual_re.max(acc_re.sqrt());
    }

    Ok(MembershipReport {
        in_set: spectrum_match && residual_im <= tol && residual_re <= tol,
        residual_im,
        residual_re,
        spectrum_match,
    })
}

/// Symbolic classification of the invariant set when the observable has the
/// one-gap structure and the structural conditions hold.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSetClassification {
    pub isolated: bool,
    pub target: usize,
    /// Description of the singleton component containing the target.
    pub e1: String,
    /// Description of the complementary component.
    pub e2: String,
    /// For two-level systems the set is exactly this pair of eigenstates.
    pub eigenstate_set: Option<[usize; 2]>,
}

/// Check the isolation hypotheses (structural conditions, one-gap observable,
/// pure initial state) and classify the invariant set.
pub fn target_isolated(
    sys: &QuantumSystem,
    obs: &LyapunovObservable,
    rho0: &Density,
) -> Result<InvariantSetClassification> {
    let target = obs.target();
    let report = check_conditions(sys, target, DEGENERACY_TOL);
    if !report.all_ok() {
        return Err(Error::ConditionViolation {
            report: report.summary(),
        });
    }
    if (rho0.purity() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            what: format!("initial state is mixed (purity {:.12})", rho0.purity()),
        });
    }
    let n = sys.dim();
    let f = target.index();
    let eigenstate_set = if n == 2 { Some([f, 1 - f]) } else { None };
    Ok(InvariantSetClassification {
        isolated: true,
        target: f,
        e1: format!("{{rho_f}}: the target eigenstate |{}><{}|", f + 1, f + 1),
        e2: format!(
            "states with zero row/column at level {} whose remaining {}x{} block has one eigenvalue 1 and {} zero(s)",
            f + 1,
            n - 1,
            n - 1,
            n - 2
        ),
        eigenstate_set,
    })
}
