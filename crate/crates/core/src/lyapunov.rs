//! Lyapunov observable construction and the quantities derived from it.
//!
//! The observable is a diagonal matrix with one distinguished entry at the
//! target level; the gap between that entry and the common value of the rest
//! drives convergence. This module evaluates V = tr(P rho), the per-channel
//! drift terms T_k = tr(-i rho [P, H_k]), the reachable-amplitude bound on
//! |T_k|, gain sizing for the standard law, hardness/gap sizing for the
//! approximate bang-bang laws, and the sinusoidal kick used when the initial
//! state has zero overlap with the target.

use crate::error::{Error, Result};
use crate::matrix::fidelity;
use crate::model::{QuantumSystem, TargetSpec};
use crate::scalar::NumericPolicy;
use crate::{matrix, CMatrix, Density, C64};

/// Imaginary residue above this value in a drift term indicates a
/// Hermiticity bug upstream and is reported as an error.
pub const DRIFT_IM_TOL: f64 = 1e-9;

/// Overlap below this value counts as "zero overlap with target".
pub const ZERO_OVERLAP_TOL: f64 = 1e-10;

/// Diagonal observable p_j = p for j != f, p_f < p at the target.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovObservable {
    p_diag: Vec<f64>,
    target: TargetSpec,
    gap: f64,
}

impl LyapunovObservable {
    pub fn p_diag(&self) -> &[f64] {
        &self.p_diag
    }

    pub fn target(&self) -> TargetSpec {
        self.target
    }

    /// The convergence-driving difference p - p_f > 0.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn dim(&self) -> usize {
        self.p_diag.len()
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_diag(&self.p_diag)
    }
}

/// Build the observable with value `p` on every level except `p_f` at the
/// target. Requires 0 <= p_f < p.
pub fn build_p(target: TargetSpec, dim: usize, p: f64, p_f: f64) -> Result<LyapunovObservable> {
    if target.index() >= dim {
        return Err(Error::InvalidParameter {
            what: format!("target {} for dim {dim}", target.index()),
        });
    }
    if p_f.is_nan() || p_f < 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("p_f = {p_f} must be >= 0"),
        });
    }
    if p.is_nan() || p <= p_f {
        return Err(Error::InvalidParameter {
            what: format!("need p > p_f, got p = {p}, p_f = {p_f}"),
        });
    }
    let mut p_diag = vec![p; dim];
    p_diag[target.index()] = p_f;
    Ok(LyapunovObservable {
        p_diag,
        target,
        gap: p - p_f,
    })
}

/// Build from an explicit diagonal, validating the one-gap structure.
pub fn observable_from_diag(target: TargetSpec, diag: &[f64]) -> Result<LyapunovObservable> {
    let f = target.index();
    if f >= diag.len() {
        return Err(Error::InvalidParameter {
            what: "target outside diagonal".into(),
        });
    }
    let p_f = diag[f];
    let mut p_common = None;
    for (j, &v) in diag.iter().enumerate() {
        if j == f {
            continue;
        }
        match p_common {
            None => p_common = Some(v),
            Some(p) if (p - v).abs() > 1e-12 => {
                return Err(Error::InvalidParameter {
                    what: "observable diagonal must share one value off the target".into(),
                })
            }
            _ => {}
        }
    }
    let p = p_common.ok_or(Error::InvalidParameter {
        what: "dim < 2".into(),
    })?;
    build_p(target, diag.len(), p, p_f)
}

/// V = tr(P rho), a diagonal contraction.
pub fn lyapunov_value(obs: &LyapunovObservable, rho: &Density) -> f64 {
    debug_assert_eq!(obs.dim(), rho.dim());
    lyapunov_value_raw(obs, rho.matrix())
}

pub(crate) fn lyapunov_value_raw(obs: &LyapunovObservable, rho: &CMatrix) -> f64 {
    obs.p_diag
        .iter()
        .enumerate()
        .map(|(j, &pj)| pj * rho[(j, j)].re)
        .sum()
}

/// Drift terms T_k = tr(-i rho [P, H_k]) for every control channel.
///
/// The value is real for Hermitian inputs; the numerically-zero imaginary
/// part is asserted below [`DRIFT_IM_TOL`] and stripped, which catches
/// Hermiticity drift instead of hiding it.
pub fn drift_terms(
    obs: &LyapunovObservable,
    sys: &QuantumSystem,
    rho: &Density,
) -> Result<Vec<f64>> {
    if obs.dim() != sys.dim() || rho.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: obs.dim().min(rho.dim()),
        });
    }
    drift_terms_raw(obs, sys, rho.matrix())
}

pub(crate) fn drift_terms_raw(
    obs: &LyapunovObservable,
    sys: &QuantumSystem,
    rho: &CMatrix,
) -> Result<Vec<f64>> {
    let n = sys.dim();
    let p = &obs.p_diag;
    let mut out = Vec::with_capacity(sys.num_controls());
    for ctrl in sys.controls() {
        let hk = &ctrl.hamiltonian;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            for l in 0..n {
                let w = p[l] - p[j];
                if w != 0.0 {
                    acc += rho[(j, l)] * hk[(l, j)] * w;
                }
            }
        }
        // T_k = -i * acc
        let tk = C64::new(0.0, -1.0) * acc;
        if tk.im.abs() > DRIFT_IM_TOL {
            return Err(Error::ImaginaryResidue { value: tk.im });
        }
        out.push(tk.re);
    }
    Ok(out)
}

/// Euclidean norm of the target coupling column of H_k (the f-th column with
/// the f-th entry removed).
pub fn coupling_column_norm(sys: &QuantumSystem, target: TargetSpec, k: usize) -> f64 {
    let f = target.index();
    let hk = &sys.controls()[k].hamiltonian;
    let mut acc = 0.0;
    for j in 0..sys.dim() {
        if j != f {
            acc += hk[(j, f)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Reachable-set bound |T_k| <= gap * ||R_k||, linear in the observable gap.
pub fn amplitude_bound_value(gap: f64, coupling_norm: f64) -> f64 {
    gap * coupling_norm
}

/// Amplitude bound for channel `k` of a system.
pub fn tk_amplitude_bound(obs: &LyapunovObservable, sys: &QuantumSystem, k: usize) -> f64 {
    amplitude_bound_value(obs.gap(), coupling_column_norm(sys, obs.target(), k))
}

/// Gain K = S / (gap * ||R_k||) sizing the standard law so its magnitude never
/// exceeds the admissible strength on the reachable set.
pub fn standard_gain_value(s_max: f64, gap: f64, coupling_norm: f64) -> Result<f64> {
    if coupling_norm <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "zero coupling column".into(),
        });
    }
    Ok(s_max / (gap * coupling_norm))
}

/// Standard-law gain for channel `k`.
pub fn standard_gain(obs: &LyapunovObservable, sys: &QuantumSystem, k: usize) -> Result<f64> {
    let norm = coupling_column_norm(sys, obs.target(), k);
    if norm <= 0.0 {
        return Err(Error::UncoupledControl { channel: k });
    }
    standard_gain_value(sys.controls()[k].s_max, obs.gap(), norm)
}

/// Hardness parameter of an approximate bang-bang family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbbHardness {
    /// Sigmoid-family hardness (larger is harder).
    Gamma(f64),
    /// Rational-family hardness (smaller is harder).
    Eta(f64),
}

/// Minimal observable gap making the chosen approximate bang-bang law operate
/// in its saturated (bang-bang dominant) region up to level `beta` of full
/// strength.
///
/// Inverting each law at |u| = beta S gives the drift-term magnitude where
/// that level is reached; requiring it to fit under the reachable bound
/// gap * ||R_k|| yields
/// gap > ln((1 + beta) / (1 - beta)) / (gamma ||R_k||) for the sigmoid
/// family and gap > beta eta / ((1 - beta) ||R_k||) for the rational family.
pub fn bang_bang_dominance_gap(
    hardness: AbbHardness,
    beta: f64,
    coupling_norm: f64,
) -> Result<f64> {
    if beta.is_nan() || beta <= 0.0 || beta >= 1.0 {
        return Err(Error::InvalidParameter {
            what: format!("beta = {beta} outside (0,1)"),
        });
    }
    if coupling_norm <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "zero coupling column".into(),
        });
    }
    match hardness {
        AbbHardness::Gamma(g) => {
            if g <= 0.0 {
                return Err(Error::InvalidParameter {
                    what: format!("gamma = {g} must be > 0"),
                });
            }
            Ok(((1.0 + beta) / (1.0 - beta)).ln() / (g * coupling_norm))
        }
        AbbHardness::Eta(e) => {
            if e <= 0.0 {
                return Err(Error::InvalidParameter {
                    what: format!("eta = {e} must be > 0"),
                });
            }
            Ok(beta * e / ((1.0 - beta) * coupling_norm))
        }
    }
}

/// Control values at one instant, together with the drift terms they answered.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignalValue {
    pub t: f64,
    pub u: Vec<f64>,
    pub tk: Vec<f64>,
}

impl ControlSignalValue {
    /// Check the recorded strengths against the admissible bounds.
    pub fn within_bounds(&self, strengths: &[f64]) -> bool {
        self.u
            .iter()
            .zip(strengths)
            .all(|(u, s)| u.abs() <= s + 1e-12)
    }
}

/// Open-loop sinusoidal kick u_k(t) = S_k sin(omega t) on [0, t0] used to move
/// a zero-overlap initial state off the invariant set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSchedule {
    pub strengths: Vec<f64>,
    /// Drive frequency omega_jf = lambda_j - lambda_f.
    pub omega: f64,
    pub t0: f64,
    /// The populated level j the drive frequency refers to.
    pub level: usize,
}

impl ExcitationSchedule {
    /// Control vector at time `t`; zero outside [0, t0].
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if t < 0.0 || t > self.t0 {
            return vec![0.0; self.strengths.len()];
        }
        let s = (self.omega * t).sin();
        self.strengths.iter().map(|&sk| sk * s).collect()
    }
}

/// Design and verify an initial excitation for tr(rho0 rho_f) = 0.
///
/// Picks the populated level `j` (smallest population above 1e-6 unless
/// given), drives every channel at S_k sin(omega_jf t) for a tenth of the
/// transition period, and verifies by propagation that the target overlap
/// became nonzero; on failure the duration doubles, up to 8 retries.
pub fn initial_excitation(
    sys: &QuantumSystem,
    target: TargetSpec,
    rho0: &Density,
    level: Option<usize>,
    t0: Option<f64>,
    dt: f64,
) -> Result<(ExcitationSchedule, Density)> {
    let f = target.index();
    let rf = target.projector(sys.dim());
    let overlap = fidelity(rho0, &rf)?;
    if overlap > ZERO_OVERLAP_TOL {
        return Err(Error::InvalidParameter {
            what: format!("initial overlap {overlap:.3e} is nonzero; no excitation needed"),
        });
    }
    let j = match level {
        Some(j) => {
            if j == f || j >= sys.dim() {
                return Err(Error::InvalidParameter {
                    what: format!("excitation level {j}"),
                });
            }
            if rho0.population(j) <= 1e-6 {
                return Err(Error::InvalidParameter {
                    what: format!("level {j} carries no population"),
                });
            }
            j
        }
        None => (0..sys.dim())
            .find(|&j| j != f && rho0.population(j) > 1e-6)
            .ok_or(Error::InvalidParameter {
                what: "no populated level found".into(),
            })?,
    };
    let omega = sys.transition_frequency(j, f);
    if omega.abs() <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "degenerate drive frequency".into(),
        });
    }
    let mut duration = match t0 {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            return Err(Error::InvalidParameter {
                what: format!("t0 = {v}"),
            })
        }
        None => 0.1 * std::f64::consts::TAU / omega.abs(),
    };

    let policy = NumericPolicy::<f64>::default();
    let strengths = sys.strengths();
    let max_attempts = 9; // initial duration plus 8 doublings
    for attempt in 0..max_attempts {
        let schedule = ExcitationSchedule {
            strengths: strengths.clone(),
            omega,
            t0: duration,
            level: j,
        };
        // Zero-order-hold propagation of the sinusoidal drive.
        let mut rho = rho0.matrix().clone();
        let mut t = 0.0;
        while t < duration - 1e-15 {
            let step = dt.min(duration - t);
            let u = schedule.eval(t);
            let h = sys.hamiltonian(&u)?;
            let prop = matrix::matrix_exp_skewh(&h, step, &policy)?;
            rho = prop.mul(&rho)?.mul(&prop.adjoint())?;
            t += step;
        }
        let reached = Density::new(rho.hermitized(), &policy)?;
        if fidelity(&reached, &rf)? > ZERO_OVERLAP_TOL {
            return Ok((schedule, reached));
        }
        if attempt + 1 < max_attempts {
            duration *= 2.0;
        }
    }
    Err(Error::ExcitationFailed {
        attempts: max_attempts,
    })
}
