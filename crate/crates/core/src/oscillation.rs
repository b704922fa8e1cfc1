//! Two-level chattering analysis.
//!
//! Under pure bang-bang control a two-level system can enter a high-frequency
//! oscillation with vanishing dwell time once a population/coherence ratio
//! crosses a threshold at a zero point of the drift term. This module holds
//! that sufficient condition, the closed-form drift term under constant
//! control used as an analytic oracle, and a scan that locates the first
//! onset time along a simulated bang-bang run.

use crate::controllers::{Controller, ControllerConfig};
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovObservable;
use crate::model::QuantumSystem;
use crate::simulator::{run, SimConfig};
use crate::{Density, C64};

/// Coherence below this magnitude counts as "inside the invariant set".
pub const COHERENCE_TOL: f64 = 1e-12;

/// Zero-point precondition tolerance on Im(r* rho_fg).
pub const ZERO_POINT_TOL: f64 = 1e-9;

/// Parameters of a two-level system in the standard form: diagonal internal
/// Hamiltonian, one off-diagonal coupling r, observable gap, and strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    /// Transition frequency lambda_f - lambda_g > 0 (target is the upper level).
    pub omega: f64,
    /// Coupling entry (H_1)_{fg} != 0.
    pub r: C64,
    /// Observable gap p - p_f > 0.
    pub gap: f64,
    /// Admissible strength of the single control.
    pub strength: f64,
    /// Target level index.
    pub target: usize,
    /// The other level index.
    pub other: usize,
}

impl TwoLevelParams {
    /// Extract the parameters from a one-control two-level system, validating
    /// the standard Hamiltonian form.
    pub fn from_system(
        sys: &QuantumSystem,
        obs: &LyapunovObservable,
        strength: Option<f64>,
    ) -> Result<Self> {
        if sys.dim() != 2 {
            return Err(Error::DimensionOutOfRange { dim: sys.dim() });
        }
        if sys.num_controls() != 1 {
            return Err(Error::InvalidParameter {
                what: format!(
                    "two-level analysis needs one control, got {}",
                    sys.num_controls()
                ),
            });
        }
        let f = obs.target().index();
        let g = 1 - f;
        let h1 = &sys.controls()[0].hamiltonian;
        let diag_residual = h1[(0, 0)].norm().max(h1[(1, 1)].norm());
        if diag_residual > 1e-10 {
            return Err(Error::InvalidParameter {
                what: "control Hamiltonian must be purely off-diagonal".into(),
            });
        }
        let r = h1[(f, g)];
        if r.norm() == 0.0 {
            return Err(Error::UncoupledControl { channel: 0 });
        }
        let omega = sys.transition_frequency(f, g);
        if omega.is_nan() || omega <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("target must be the upper level (omega_fg = {omega})"),
            });
        }
        let s = strength.unwrap_or(sys.controls()[0].s_max);
        if s.is_nan() || s <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("strength {s}"),
            });
        }
        Ok(TwoLevelParams {
            omega,
            r,
            gap: obs.gap(),
            strength: s,
            target: f,
            other: g,
        })
    }

    /// Population difference rho_ff - rho_gg.
    fn population_diff(&self, rho: &Density) -> f64 {
        rho.population(self.target) - rho.population(self.other)
    }

    /// Coupled coherence entry rho_fg.
    fn coherence(&self, rho: &Density) -> C64 {
        rho.entry(self.target, self.other)
    }

    /// Left-hand side |r| (rho_ff - rho_gg) / |rho_fg|, or `None` when the
    /// coherence is numerically zero (invariant set).
    pub fn condition_lhs(&self, rho: &Density) -> Option<f64> {
        let coh = self.coherence(rho).norm();
        if coh <= COHERENCE_TOL {
            return None;
        }
        Some(self.r.norm() * self.population_diff(rho) / coh)
    }

    /// The chattering threshold omega / S for a given strength.
    pub fn condition_rhs(&self, strength: f64) -> f64 {
        self.omega / strength
    }
}

/// Outcome of the high-frequency-oscillation test at a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationCheck {
    /// The sufficient condition holds: chattering with infinitesimal period.
    Holds,
    /// The condition fails; an effective bang-bang arc exists.
    Fails,
    /// The coherence is zero: the state sits in the invariant set and the
    /// control stays zero forever.
    InvariantSet,
}

impl OscillationCheck {
    pub fn holds(&self) -> bool {
        matches!(self, OscillationCheck::Holds)
    }
}

/// Evaluate the chattering condition at a state with the configured strength.
pub fn oscillation_condition(params: &TwoLevelParams, rho: &Density) -> OscillationCheck {
    oscillation_condition_with_strength(params, rho, params.strength)
}

/// Same test with an explicit strength (used by variable-strength switching).
pub fn oscillation_condition_with_strength(
    params: &TwoLevelParams,
    rho: &Density,
    strength: f64,
) -> OscillationCheck {
    match params.condition_lhs(rho) {
        None => OscillationCheck::InvariantSet,
        Some(lhs) => {
            if lhs >= params.condition_rhs(strength) {
                OscillationCheck::Holds
            } else {
                OscillationCheck::Fails
            }
        }
    }
}

/// Closed-form drift term under constant control `u` started from a zero
/// point: T_1(t) = (2 gap / w_u) sin(w_u t) [u |r|^2 (rho_ff - rho_gg)
/// - omega Re(r* rho_fg)], with w_u = sqrt(omega^2 + 4 |r|^2 u^2).
///
/// Requires the zero-point condition Im(r* rho_fg) = 0; the formula is not
/// valid elsewhere.
pub fn t1_closed_form(params: &TwoLevelParams, rho_zero: &Density, u: f64, t: f64) -> Result<f64> {
    let coh = rho_zero.entry(params.target, params.other);
    let r_conj_coh = params.r.conj() * coh;
    if r_conj_coh.im.abs() > ZERO_POINT_TOL {
        return Err(Error::InvalidParameter {
            what: format!(
                "state is not at a zero point: Im(r* rho_fg) = {:.3e}",
                r_conj_coh.im
            ),
        });
    }
    let r2 = params.r.norm_sqr();
    let w_u = (params.omega * params.omega + 4.0 * r2 * u * u).sqrt();
    let bracket = u * r2 * params.population_diff(rho_zero) - params.omega * r_conj_coh.re;
    Ok(2.0 * params.gap / w_u * (w_u * t).sin() * bracket)
}

/// Simulate pure bang-bang control and return the first zero point of the
/// drift term at which the chattering condition holds, if any.
pub fn oscillation_onset_scan(
    sys: &QuantumSystem,
    obs: &LyapunovObservable,
    rho0: &Density,
    cfg: &SimConfig,
) -> Result<Option<f64>> {
    let params = TwoLevelParams::from_system(sys, obs, None)?;
    let controller = Controller::new(ControllerConfig::bang_bang(sys.strengths()), sys, obs)?;
    let traj = run(sys, obs, controller, rho0, cfg)?;
    for sample in &traj.samples {
        if sample.flags.zero_point && oscillation_condition(&params, &sample.rho).holds() {
            return Ok(Some(sample.t));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::build_p;
    use crate::matrix::matrix_exp_skewh;
    use crate::model::{builtin_system, BuiltinSystem};
    use crate::scalar::NumericPolicy;
    use crate::CMatrix;

    fn setup() -> (QuantumSystem, TwoLevelParams, LyapunovObservable) {
        let (sys, target, _) = builtin_system(BuiltinSystem::TwoLevel);
        let obs = build_p(target, 2, 1.0, 0.5).unwrap();
        let params = TwoLevelParams::from_system(&sys, &obs, None).unwrap();
        (sys, params, obs)
    }

    fn pure_state(p11: f64, phase: f64) -> Density {
        // |psi> = sqrt(p11)|1> + e^{i phase} sqrt(1-p11)|2>
        let a = C64::new(p11.sqrt(), 0.0);
        let b = C64::new(phase.cos(), phase.sin()) * (1.0 - p11).sqrt();
        Density::pure_state(&[a, b], &NumericPolicy::default()).unwrap()
    }

    #[test]
    fn condition_examples() {
        let (_, params, _) = setup();
        // pure state with rho_11 = 0.9: |rho_12| = 0.3, LHS = 0.8/0.3 >= 2
        let rho = pure_state(0.9, 0.0);
        assert!(oscillation_condition(&params, &rho).holds());

        // rho_11 = 0.6: LHS = 0.2/sqrt(0.24) < 2
        let rho = pure_state(0.6, 0.0);
        assert_eq!(
            oscillation_condition(&params, &rho),
            OscillationCheck::Fails
        );

        // population at or below one half can never satisfy the condition
        for p11 in [0.1, 0.3, 0.5] {
            let rho = pure_state(p11, 0.3);
            assert!(!oscillation_condition(&params, &rho).holds());
        }

        // zero coherence reports the invariant set
        let rho = Density::eigenstate(2, 0, &NumericPolicy::default()).unwrap();
        assert_eq!(
            oscillation_condition(&params, &rho),
            OscillationCheck::InvariantSet
        );
    }

    #[test]
    fn condition_ignores_coherence_phase() {
        let (_, params, _) = setup();
        let a = params.condition_lhs(&pure_state(0.8, 0.0)).unwrap();
        let b = params.condition_lhs(&pure_state(0.8, 1.9)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn closed_form_zeroes() {
        let (_, params, _) = setup();
        let rho = pure_state(0.7, 0.0);
        assert_eq!(t1_closed_form(&params, &rho, 0.2, 0.0).unwrap(), 0.0);
        let w_u = (params.omega.powi(2) + 4.0 * params.r.norm_sqr() * 0.04).sqrt();
        let at_pi = t1_closed_form(&params, &rho, 0.2, std::f64::consts::PI / w_u).unwrap();
        assert!(at_pi.abs() < 1e-13);
    }

    #[test]
    fn closed_form_rejects_non_zero_point() {
        let (_, params, _) = setup();
        let rho = pure_state(0.7, 1.0); // complex coherence: Im(r* rho_12) != 0
        assert!(t1_closed_form(&params, &rho, 0.1, 0.5).is_err());
    }

    #[test]
    fn closed_form_free_evolution_reduction() {
        // u = 0 reduces to -2 gap rho_12 sin(omega t) for real coherence, r = 1.
        let (_, params, _) = setup();
        let rho = pure_state(0.7, 0.0);
        let c = rho.entry(0, 1).re;
        for i in 1..20 {
            let t = i as f64 * 0.3;
            let got = t1_closed_form(&params, &rho, 0.0, t).unwrap();
            let expect = -2.0 * params.gap * c * (params.omega * t).sin();
            assert!((got - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_matches_propagated_drift() {
        // Propagate rho(t) = e^{-iHt} rho(0) e^{iHt} under constant control and
        // compare the numerically evaluated drift term with the closed form.
        let (sys, params, obs) = setup();
        let policy = NumericPolicy::default();
        for (i, &u) in [-0.2, 0.0, 0.2].iter().enumerate() {
            let rho0 = pure_state(0.55 + 0.1 * i as f64, 0.0);
            let h = sys.hamiltonian(&[u]).unwrap();
            let w_u = (params.omega.powi(2) + 4.0 * params.r.norm_sqr() * u * u).sqrt();
            for j in 0..25 {
                let t = j as f64 * (2.0 * std::f64::consts::PI / w_u) / 24.0;
                let prop = matrix_exp_skewh(&h, t, &policy).unwrap();
                let rho_t = Density::new(
                    prop.mul(rho0.matrix())
                        .unwrap()
                        .mul(&prop.adjoint())
                        .unwrap()
                        .hermitized(),
                    &policy,
                )
                .unwrap();
                let numeric = crate::lyapunov::drift_terms(&obs, &sys, &rho_t).unwrap()[0];
                let closed = t1_closed_form(&params, &rho0, u, t).unwrap();
                assert!(
                    (numeric - closed).abs() < 1e-10,
                    "u = {u}, t = {t}: numeric {numeric} vs closed {closed}"
                );
            }
        }
    }

    #[test]
    fn from_system_rejects_bad_forms() {
        let (sys, target, _) = builtin_system(BuiltinSystem::TwoLevel);
        // target on the lower level puts the transition frequency negative
        let obs = build_p(crate::model::TargetSpec::new(1, 2).unwrap(), 2, 1.0, 0.5).unwrap();
        assert!(TwoLevelParams::from_system(&sys, &obs, None).is_err());

        // diagonal entries in the control Hamiltonian are rejected
        let h1 = CMatrix::from_real_rows(&[vec![0.3, 1.0], vec![1.0, 0.0]]).unwrap();
        let sys2 = QuantumSystem::new(
            vec![0.4, 0.0],
            vec![crate::model::ControlChannel {
                hamiltonian: h1,
                s_max: 0.2,
                label: None,
            }],
            "arb",
        )
        .unwrap();
        let obs = build_p(target, 2, 1.0, 0.5).unwrap();
        assert!(TwoLevelParams::from_system(&sys2, &obs, None).is_err());
    }
}
