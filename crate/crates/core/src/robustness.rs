//! Perturbed-propagation experiments against the open-loop distance bound.
//!
//! A random Hamiltonian perturbation with spectral-norm budget epsilon is
//! applied to a copy of the system; the nominal control schedule replays on
//! the copy open-loop, and the recorded state distance is checked against
//! min(e^{2 t eps} - 1, 2). Rapid convergence shows up directly in the
//! epsilon budget a target accuracy leaves available.

use crate::controllers::Controller;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovObservable;
use crate::matrix::spectral_norm;
use crate::model::{check_conditions, ControlChannel, QuantumSystem, DEGENERACY_TOL};
use crate::rng::SplitMix64;
use crate::simulator::{run_with_shadow, trajectory_from_samples, SimConfig, Trajectory};
use crate::{CMatrix, Density, C64};

/// Margin below which the distance bound counts as violated (bug signal).
pub const BOUND_VIOLATION_TOL: f64 = -1e-9;

/// A sampled Hamiltonian perturbation with exact norm budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    /// Real diagonal perturbation of the internal Hamiltonian.
    pub d_h0: Vec<f64>,
    /// Hermitian perturbations of the control Hamiltonians.
    pub d_hk: Vec<CMatrix>,
    pub seed: u64,
}

impl PerturbationSpec {
    /// The conservative budget ||dH0|| + sum_k S_k ||dH_k||, which bounds
    /// ||Delta H(t)|| for any admissible control values.
    pub fn budget(&self, strengths: &[f64]) -> f64 {
        let h0_norm = self.d_h0.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let mut total = h0_norm;
        for (dh, &s) in self.d_hk.iter().zip(strengths) {
            total += s * spectral_norm(dh);
        }
        total
    }

    /// The perturbed system, sharing bounds and labels with the nominal one.
    pub fn apply(&self, sys: &QuantumSystem) -> Result<QuantumSystem> {
        if self.d_h0.len() != sys.dim() || self.d_hk.len() != sys.num_controls() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                found: self.d_h0.len(),
            });
        }
        let h0: Vec<f64> = sys
            .h0_diag()
            .iter()
            .zip(&self.d_h0)
            .map(|(a, b)| a + b)
            .collect();
        let controls: Vec<ControlChannel> = sys
            .controls()
            .iter()
            .zip(&self.d_hk)
            .map(|(ctrl, dh)| {
                Ok(ControlChannel {
                    hamiltonian: ctrl.hamiltonian.add(dh)?,
                    s_max: ctrl.s_max,
                    label: ctrl.label.clone(),
                })
            })
            .collect::<Result<_>>()?;
        QuantumSystem::new(h0, controls, sys.unit.clone())
    }
}

/// Draw a perturbation with budget exactly `epsilon`, resampling until the
/// perturbed system still passes the structural conditions for the target.
pub fn sample_perturbation(
    sys: &QuantumSystem,
    target: crate::model::TargetSpec,
    epsilon: f64,
    seed: u64,
) -> Result<PerturbationSpec> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("epsilon = {epsilon}"),
        });
    }
    let n = sys.dim();
    let m = sys.num_controls();
    if epsilon == 0.0 {
        return Ok(PerturbationSpec {
            epsilon,
            d_h0: vec![0.0; n],
            d_hk: (0..m).map(|_| CMatrix::zeros(n)).collect(),
            seed,
        });
    }
    let mut gen = SplitMix64::new(seed);
    let strengths = sys.strengths();
    let max_attempts = 16;
    for _attempt in 0..max_attempts {
        let d_h0: Vec<f64> = (0..n).map(|_| gen.next_symmetric()).collect();
        let mut d_hk = Vec::with_capacity(m);
        for _ in 0..m {
            let mut raw = CMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    raw[(i, j)] = C64::new(gen.next_symmetric(), gen.next_symmetric());
                }
            }
            d_hk.push(raw.hermitized());
        }
        let unscaled = PerturbationSpec {
            epsilon,
            d_h0,
            d_hk,
            seed,
        };
        let budget = unscaled.budget(&strengths);
        if budget <= 0.0 {
            continue;
        }
        let factor = epsilon / budget;
        let spec = PerturbationSpec {
            epsilon,
            d_h0: unscaled.d_h0.iter().map(|x| x * factor).collect(),
            d_hk: unscaled.d_hk.iter().map(|m| m.scale(factor)).collect(),
            seed,
        };
        let perturbed = spec.apply(sys)?;
        if check_conditions(&perturbed, target, DEGENERACY_TOL).all_ok() {
            return Ok(spec);
        }
    }
    Err(Error::PerturbationRejected {
        attempts: max_attempts,
    })
}

/// Result of propagating nominal and perturbed systems under one schedule.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub nominal: Trajectory,
    pub perturbed: Trajectory,
    /// Spectral-norm distance ||rho~(t) - rho(t)|| at every recorded sample.
    pub distance: Vec<(f64, f64)>,
}

/// Run the controller on the nominal system and replay its control schedule
/// open-loop on the perturbed system.
pub fn paired_run(
    sys: &QuantumSystem,
    perturbation: &PerturbationSpec,
    obs: &LyapunovObservable,
    controller: Controller,
    rho0: &Density,
    cfg: &SimConfig,
) -> Result<PairedRun> {
    let perturbed_sys = perturbation.apply(sys)?;
    let (nominal, shadow) = run_with_shadow(sys, obs, controller, rho0, cfg, Some(&perturbed_sys))?;
    let shadow_samples = shadow.expect("shadow requested");
    let distance = nominal
        .samples
        .iter()
        .zip(&shadow_samples)
        .map(|(a, b)| {
            let diff = b.rho.matrix().sub(a.rho.matrix())?;
            Ok((a.t, spectral_norm(&diff)))
        })
        .collect::<Result<Vec<_>>>()?;
    let perturbed = trajectory_from_samples(shadow_samples, cfg)?;
    Ok(PairedRun {
        nominal,
        perturbed,
        distance,
    })
}

/// Margin report for a distance series against min(e^{2 t eps} - 1, 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// Smallest bound(t) - distance(t) over the series.
    pub min_margin: f64,
    /// Time of the smallest margin.
    pub worst_t: f64,
    pub satisfied: bool,
}

/// The theoretical distance envelope at time `t` for budget `epsilon`.
pub fn distance_bound(t: f64, epsilon: f64) -> f64 {
    ((2.0 * t * epsilon).exp() - 1.0).min(2.0)
}

/// Check a recorded distance series against the envelope.
pub fn check_bound(distance: &[(f64, f64)], epsilon: f64) -> BoundReport {
    let mut min_margin = f64::INFINITY;
    let mut worst_t = 0.0;
    for &(t, d) in distance {
        let margin = distance_bound(t, epsilon) - d;
        if margin < min_margin {
            min_margin = margin;
            worst_t = t;
        }
    }
    if !min_margin.is_finite() {
        min_margin = 0.0;
    }
    BoundReport {
        min_margin,
        worst_t,
        satisfied: min_margin >= BOUND_VIOLATION_TOL,
    }
}

/// Largest perturbation budget that still guarantees final accuracy `xi`
/// when the nominal run reaches accuracy `xi1` at time `t_final`:
/// ln(1 + xi - xi1) / (2 t_final).
pub fn epsilon_budget(t_final: f64, xi: f64, xi1: f64) -> Result<f64> {
    if t_final.is_nan() || t_final <= 0.0 {
        return Err(Error::InvalidParameter {
            what: format!("t_final = {t_final}"),
        });
    }
    if xi1.is_nan() || xi1 < 0.0 || xi < xi1 {
        return Err(Error::InvalidParameter {
            what: format!("need 0 <= xi1 <= xi, got xi = {xi}, xi1 = {xi1}"),
        });
    }
    Ok((1.0 + xi - xi1).ln() / (2.0 * t_final))
}
