//! The control-law families.
//!
//! Six families share one evaluation interface: the smooth standard law, the
//! discontinuous bang-bang law, two smooth approximate bang-bang (ABB) laws,
//! a one-way switch from bang-bang to the standard law triggered by the
//! chattering condition, and a bang-bang law whose strength is re-sized at
//! zero points. Every family satisfies u_k(T) * T <= 0.

use crate::error::{Error, Result};
use crate::lyapunov::{standard_gain, LyapunovObservable};
use crate::model::QuantumSystem;
use crate::oscillation::{OscillationCheck, TwoLevelParams};
use crate::{CMatrix, Density};

/// Default dead-zone below which a drift term counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// Exponent magnitude beyond which the sigmoid law saturates outright.
const ABB1_EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlFamily {
    Standard,
    BangBang,
    Abb1,
    Abb2,
    SwitchBbStd,
    SwitchVarStrength,
}

impl ControlFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ControlFamily::Standard => "standard",
            ControlFamily::BangBang => "bang_bang",
            ControlFamily::Abb1 => "abb1",
            ControlFamily::Abb2 => "abb2",
            ControlFamily::SwitchBbStd => "switch_bb_std",
            ControlFamily::SwitchVarStrength => "switch_var_strength",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(ControlFamily::Standard),
            "bang_bang" => Ok(ControlFamily::BangBang),
            "abb1" => Ok(ControlFamily::Abb1),
            "abb2" => Ok(ControlFamily::Abb2),
            "switch_bb_std" => Ok(ControlFamily::SwitchBbStd),
            "switch_var_strength" => Ok(ControlFamily::SwitchVarStrength),
            other => Err(Error::InvalidParameter {
                what: format!("unknown control family `{other}`"),
            }),
        }
    }
}

/// Strength replacement rule for the variable-strength switching family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrengthRule {
    /// S' = mu omega |rho_fg| / (|r| (rho_ff - rho_gg)).
    FixedFraction,
    /// S' = 2 mu omega |rho_fg|^2 / (|r| (rho_ff - rho_gg)).
    CoeffVarying,
}

/// Parameters for any of the six families; unused fields stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub family: ControlFamily,
    /// Gains K_k (standard; optional override for the switching family).
    pub gains: Vec<f64>,
    /// Strengths S_k; empty means "use the system bounds".
    pub strengths: Vec<f64>,
    /// Sigmoid hardness gamma_k (abb1).
    pub gamma: Vec<f64>,
    /// Rational hardness eta_k (abb2).
    pub eta: Vec<f64>,
    /// Fraction in (0,1) for the variable-strength rules.
    pub mu: f64,
    pub strength_rule: StrengthRule,
    /// Dead-zone for treating a drift term as zero.
    pub zero_tol: f64,
}

impl ControllerConfig {
    fn base(family: ControlFamily) -> Self {
        ControllerConfig {
            family,
            gains: Vec::new(),
            strengths: Vec::new(),
            gamma: Vec::new(),
            eta: Vec::new(),
            mu: 0.9,
            strength_rule: StrengthRule::FixedFraction,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }

    pub fn standard(gains: Vec<f64>) -> Self {
        ControllerConfig {
            gains,
            ..Self::base(ControlFamily::Standard)
        }
    }

    pub fn bang_bang(strengths: Vec<f64>) -> Self {
        ControllerConfig {
            strengths,
            ..Self::base(ControlFamily::BangBang)
        }
    }

    pub fn abb1(strengths: Vec<f64>, gamma: Vec<f64>) -> Self {
        ControllerConfig {
            strengths,
            gamma,
            ..Self::base(ControlFamily::Abb1)
        }
    }

    pub fn abb2(strengths: Vec<f64>, eta: Vec<f64>) -> Self {
        ControllerConfig {
            strengths,
            eta,
            ..Self::base(ControlFamily::Abb2)
        }
    }

    /// Switching bang-bang/standard; `gain` empty uses the sized gain
    /// S / (gap |r|).
    pub fn switching(strength: f64, gain: Option<f64>) -> Self {
        ControllerConfig {
            strengths: vec![strength],
            gains: gain.into_iter().collect(),
            ..Self::base(ControlFamily::SwitchBbStd)
        }
    }

    pub fn var_strength(strength: f64, mu: f64, rule: StrengthRule) -> Self {
        ControllerConfig {
            strengths: vec![strength],
            mu,
            strength_rule: rule,
            ..Self::base(ControlFamily::SwitchVarStrength)
        }
    }
}

/// Mode tag recorded with every trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeTag {
    Standard,
    BangBang,
    Abb1,
    Abb2,
}

impl ModeTag {
    pub fn name(&self) -> &'static str {
        match self {
            ModeTag::Standard => "standard",
            ModeTag::BangBang => "bang_bang",
            ModeTag::Abb1 => "abb1",
            ModeTag::Abb2 => "abb2",
        }
    }
}

/// Phase of the switching families (one-way bang-bang -> standard).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchMode {
    BangBang,
    Standard,
}

/// Mutable controller state: switching phase, live strength, last signs.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub mode: SwitchMode,
    /// Live strength of the variable-strength family.
    pub current_strength: f64,
    /// Last nonzero sign of each drift term (-1, 0, +1).
    pub last_sign: Vec<i8>,
}

/// Standard law u_k = -K_k T_k.
pub fn standard_control(gains: &[f64], t: &[f64]) -> Vec<f64> {
    gains.iter().zip(t).map(|(k, tk)| -k * tk).collect()
}

/// Bang-bang law u_k = -S_k sgn(T_k), with a dead zone of width `zero_tol`.
pub fn bang_bang_control(strengths: &[f64], zero_tol: f64, t: &[f64]) -> Vec<f64> {
    strengths
        .iter()
        .zip(t)
        .map(|(s, tk)| {
            if tk.abs() <= zero_tol {
                0.0
            } else {
                -s * tk.signum()
            }
        })
        .collect()
}

/// Sigmoid ABB law u_k = 2 S_k / (1 + e^{gamma_k T_k}) - S_k.
pub fn abb1_control(strengths: &[f64], gamma: &[f64], t: &[f64]) -> Vec<f64> {
    strengths
        .iter()
        .zip(gamma)
        .zip(t)
        .map(|((s, g), tk)| {
            let x = g * tk;
            if x > ABB1_EXP_GUARD {
                -s
            } else if x < -ABB1_EXP_GUARD {
                *s
            } else {
                2.0 * s / (1.0 + x.exp()) - s
            }
        })
        .collect()
}

/// Rational ABB law u_k = -S_k T_k / (|T_k| + eta_k).
pub fn abb2_control(strengths: &[f64], eta: &[f64], t: &[f64]) -> Vec<f64> {
    strengths
        .iter()
        .zip(eta)
        .zip(t)
        .map(|((s, e), tk)| -s * tk / (tk.abs() + e))
        .collect()
}

/// A control-law instance bound to a system and observable.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    state: ControllerState,
    /// Two-level data for the switching families.
    two_level: Option<TwoLevelParams>,
    /// Gains resolved for the switching family (sized gain if not given).
    switch_gain: f64,
}

impl Controller {
    pub fn new(
        cfg: ControllerConfig,
        sys: &QuantumSystem,
        obs: &LyapunovObservable,
    ) -> Result<Self> {
        let m = sys.num_controls();
        let mut cfg = cfg;
        if cfg.zero_tol <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("zero_tol = {}", cfg.zero_tol),
            });
        }
        if cfg.strengths.is_empty() {
            cfg.strengths = sys.strengths();
        }
        if cfg.strengths.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: cfg.strengths.len(),
            });
        }
        for (k, &s) in cfg.strengths.iter().enumerate() {
            if s.is_nan() || s <= 0.0 {
                return Err(Error::InvalidParameter {
                    what: format!("strength[{k}] = {s}"),
                });
            }
            if s > sys.controls()[k].s_max + 1e-12 {
                return Err(Error::InvalidParameter {
                    what: format!(
                        "strength[{k}] = {s} exceeds admissible {}",
                        sys.controls()[k].s_max
                    ),
                });
            }
        }

        let mut two_level = None;
        let mut switch_gain = 0.0;
        match cfg.family {
            ControlFamily::Standard => {
                if cfg.gains.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: cfg.gains.len(),
                    });
                }
                if cfg.gains.iter().any(|&k| k.is_nan() || k <= 0.0) {
                    return Err(Error::InvalidParameter {
                        what: "gains must be positive".into(),
                    });
                }
            }
            ControlFamily::BangBang => {}
            ControlFamily::Abb1 => {
                if cfg.gamma.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: cfg.gamma.len(),
                    });
                }
                if cfg.gamma.iter().any(|&g| g.is_nan() || g <= 0.0) {
                    return Err(Error::InvalidParameter {
                        what: "gamma must be positive".into(),
                    });
                }
            }
            ControlFamily::Abb2 => {
                if cfg.eta.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: cfg.eta.len(),
                    });
                }
                if cfg.eta.iter().any(|&e| e.is_nan() || e <= 0.0) {
                    return Err(Error::InvalidParameter {
                        what: "eta must be positive".into(),
                    });
                }
            }
            ControlFamily::SwitchBbStd | ControlFamily::SwitchVarStrength => {
                let params = TwoLevelParams::from_system(sys, obs, Some(cfg.strengths[0]))?;
                if cfg.family == ControlFamily::SwitchBbStd {
                    switch_gain = match cfg.gains.first() {
                        Some(&k) if k > 0.0 => k,
                        Some(&k) => {
                            return Err(Error::InvalidParameter {
                                what: format!("gain {k}"),
                            })
                        }
                        None => standard_gain(obs, sys, 0)?,
                    };
                } else {
                    if cfg.mu.is_nan() || cfg.mu <= 0.0 || cfg.mu >= 1.0 {
                        return Err(Error::InvalidParameter {
                            what: format!("mu = {}", cfg.mu),
                        });
                    }
                }
                two_level = Some(params);
            }
        }

        let current_strength = cfg.strengths[0];
        Ok(Controller {
            cfg,
            state: ControllerState {
                mode: SwitchMode::BangBang,
                current_strength,
                last_sign: vec![0; m],
            },
            two_level,
            switch_gain,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn zero_tol(&self) -> f64 {
        self.cfg.zero_tol
    }

    pub fn family(&self) -> ControlFamily {
        self.cfg.family
    }

    pub fn mode_tag(&self) -> ModeTag {
        match self.cfg.family {
            ControlFamily::Standard => ModeTag::Standard,
            ControlFamily::BangBang => ModeTag::BangBang,
            ControlFamily::Abb1 => ModeTag::Abb1,
            ControlFamily::Abb2 => ModeTag::Abb2,
            ControlFamily::SwitchBbStd => match self.state.mode {
                SwitchMode::BangBang => ModeTag::BangBang,
                SwitchMode::Standard => ModeTag::Standard,
            },
            ControlFamily::SwitchVarStrength => ModeTag::BangBang,
        }
    }

    /// Evaluate the control vector from the drift terms and (for the
    /// switching families) the current state matrix.
    ///
    /// Switching decisions happen here whenever the drift term sits inside
    /// the dead zone, which the simulator arranges to coincide with located
    /// zero points of T_1.
    pub fn eval_raw(&mut self, t: &[f64], rho: &CMatrix) -> Result<Vec<f64>> {
        for (sign, tk) in self.state.last_sign.iter_mut().zip(t) {
            if tk.abs() > self.cfg.zero_tol {
                *sign = if *tk > 0.0 { 1 } else { -1 };
            }
        }
        match self.cfg.family {
            ControlFamily::Standard => Ok(standard_control(&self.cfg.gains, t)),
            ControlFamily::BangBang => {
                Ok(bang_bang_control(&self.cfg.strengths, self.cfg.zero_tol, t))
            }
            ControlFamily::Abb1 => Ok(abb1_control(&self.cfg.strengths, &self.cfg.gamma, t)),
            ControlFamily::Abb2 => Ok(abb2_control(&self.cfg.strengths, &self.cfg.eta, t)),
            ControlFamily::SwitchBbStd => Ok(vec![self.eval_switching(t[0], rho)?]),
            ControlFamily::SwitchVarStrength => Ok(vec![self.eval_var_strength(t[0], rho)?]),
        }
    }

    fn density_view(&self, rho: &CMatrix) -> (f64, f64, f64) {
        let params = self.two_level.as_ref().expect("two-level family");
        let f = params.target;
        let g = params.other;
        let diff = rho[(f, f)].re - rho[(g, g)].re;
        let coh = rho[(f, g)];
        let r_coh = params.r.conj() * coh;
        (diff, coh.norm(), r_coh.re)
    }

    /// Chattering test straight from matrix entries (avoids re-validating the
    /// state on the hot path).
    fn condition_holds(&self, rho: &CMatrix, strength: f64) -> OscillationCheck {
        let params = self.two_level.as_ref().expect("two-level family");
        let (diff, coh_norm, _) = self.density_view(rho);
        if coh_norm <= crate::oscillation::COHERENCE_TOL {
            return OscillationCheck::InvariantSet;
        }
        let lhs = params.r.norm() * diff / coh_norm;
        if lhs >= params.omega / strength {
            OscillationCheck::Holds
        } else {
            OscillationCheck::Fails
        }
    }

    fn eval_switching(&mut self, t1: f64, rho: &CMatrix) -> Result<f64> {
        if self.state.mode == SwitchMode::Standard {
            return Ok(-self.switch_gain * t1);
        }
        if t1.abs() <= self.cfg.zero_tol {
            // zero point: switch permanently once the chattering condition holds
            match self.condition_holds(rho, self.cfg.strengths[0]) {
                OscillationCheck::Holds => {
                    self.state.mode = SwitchMode::Standard;
                    Ok(-self.switch_gain * t1)
                }
                // hold zero; free evolution moves T_1 off zero within a step
                _ => Ok(0.0),
            }
        } else {
            Ok(-self.cfg.strengths[0] * t1.signum())
        }
    }

    fn eval_var_strength(&mut self, t1: f64, rho: &CMatrix) -> Result<f64> {
        if t1.abs() <= self.cfg.zero_tol {
            if let OscillationCheck::Holds = self.condition_holds(rho, self.state.current_strength)
            {
                let params = self.two_level.as_ref().expect("two-level family");
                let (diff, coh_norm, _) = self.density_view(rho);
                let base = params.omega * coh_norm / (params.r.norm() * diff);
                let new_strength = match self.cfg.strength_rule {
                    StrengthRule::FixedFraction => self.cfg.mu * base,
                    StrengthRule::CoeffVarying => 2.0 * self.cfg.mu * coh_norm * base,
                };
                if new_strength.is_nan() || new_strength <= 0.0 {
                    return Err(Error::NumericalFailure {
                        detail: format!("variable-strength rule produced {new_strength}"),
                    });
                }
                // the replacement must itself fail the chattering condition
                if self.condition_holds(rho, new_strength).holds() {
                    return Err(Error::NumericalFailure {
                        detail: "replacement strength still satisfies the chattering condition"
                            .into(),
                    });
                }
                self.state.current_strength = new_strength;
            }
            Ok(0.0)
        } else {
            Ok(-self.state.current_strength * t1.signum())
        }
    }
}

/// Spec-level wrappers taking a validated state; the simulator uses
/// [`Controller::eval_raw`] on raw matrices instead.
pub fn eval_switching(controller: &mut Controller, t1: f64, rho: &Density) -> Result<f64> {
    if controller.cfg.family != ControlFamily::SwitchBbStd {
        return Err(Error::InvalidParameter {
            what: "not a switching controller".into(),
        });
    }
    Ok(controller.eval_raw(&[t1], rho.matrix())?[0])
}

pub fn eval_var_strength(controller: &mut Controller, t1: f64, rho: &Density) -> Result<f64> {
    if controller.cfg.family != ControlFamily::SwitchVarStrength {
        return Err(Error::InvalidParameter {
            what: "not a variable-strength controller".into(),
        });
    }
    Ok(controller.eval_raw(&[t1], rho.matrix())?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::build_p;
    use crate::model::{builtin_system, BuiltinSystem};
    use crate::scalar::NumericPolicy;
    use crate::C64;

    fn two_level_setup() -> (QuantumSystem, LyapunovObservable) {
        let (sys, target, _) = builtin_system(BuiltinSystem::TwoLevel);
        let obs = build_p(target, 2, 1.0, 0.5).unwrap();
        (sys, obs)
    }

    fn pure_state(p11: f64, phase: f64) -> Density {
        let a = C64::new(p11.sqrt(), 0.0);
        let b = C64::new(phase.cos(), phase.sin()) * (1.0 - p11).sqrt();
        Density::pure_state(&[a, b], &NumericPolicy::default()).unwrap()
    }

    #[test]
    fn standard_law_examples() {
        assert_eq!(standard_control(&[0.4], &[0.0]), vec![0.0]);
        assert!((standard_control(&[0.4], &[0.5])[0] + 0.2).abs() < 1e-15);
        assert!((standard_control(&[0.4], &[-0.5])[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn bang_bang_law_examples() {
        assert!((bang_bang_control(&[0.2], 1e-9, &[0.3])[0] + 0.2).abs() < 1e-15);
        assert_eq!(bang_bang_control(&[0.2], 1e-9, &[0.0]), vec![0.0]);
        // dead zone swallows sub-tolerance drift
        assert_eq!(bang_bang_control(&[0.2], 1e-9, &[-1e-12]), vec![0.0]);
    }

    #[test]
    fn abb1_law_examples() {
        assert_eq!(abb1_control(&[0.2], &[11.0], &[0.0]), vec![0.0]);
        let u = abb1_control(&[0.2], &[11.0], &[0.5])[0];
        assert!((u + 0.19837).abs() < 1e-5, "{u}");
        // saturation at extreme arguments
        assert_eq!(abb1_control(&[0.2], &[11.0], &[1e10])[0], -0.2);
        assert_eq!(abb1_control(&[0.2], &[11.0], &[-1e10])[0], 0.2);
    }

    #[test]
    fn abb2_law_examples() {
        assert_eq!(abb2_control(&[0.2], &[0.01], &[0.0]), vec![0.0]);
        let u = abb2_control(&[0.2], &[0.01], &[1.0])[0];
        assert!((u + 0.2 / 1.01).abs() < 1e-15);
        // |T| = eta gives half strength
        let u = abb2_control(&[0.2], &[0.01], &[0.01])[0];
        assert!((u + 0.1).abs() < 1e-15);
    }

    #[test]
    fn all_laws_oppose_the_drift_sign() {
        let mut x: u64 = 0x2545f4914f6cdd1d;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..10_000 {
            let t = next();
            let u_std = standard_control(&[0.7], &[t])[0];
            let u_bb = bang_bang_control(&[0.2], 1e-9, &[t])[0];
            let u_a1 = abb1_control(&[0.2], &[11.0], &[t])[0];
            let u_a2 = abb2_control(&[0.2], &[0.01], &[t])[0];
            for u in [u_std, u_bb, u_a1, u_a2] {
                assert!(u * t <= 0.0, "law sign violated at T = {t}");
            }
            for u in [u_bb, u_a1, u_a2] {
                assert!(u.abs() <= 0.2 + 1e-12);
            }
        }
    }

    #[test]
    fn abb_hardness_limits_approach_bang_bang() {
        let t = 0.05;
        let mut prev_gap = f64::INFINITY;
        for gamma in [5.0, 20.0, 80.0, 320.0, 1280.0] {
            let u = abb1_control(&[0.2], &[gamma], &[t])[0];
            let gap = (u - (-0.2)).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-12);

        let mut prev_gap = f64::INFINITY;
        for eta in [0.1, 0.01, 0.001, 1e-4, 1e-5] {
            let u = abb2_control(&[0.2], &[eta], &[t])[0];
            let gap = (u - (-0.2)).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-4);
    }

    #[test]
    fn abb_slopes_at_zero_match_finite_differences() {
        let h = 1e-9;
        let s = 0.2;
        let gamma = 11.0;
        let eta = 0.01;
        let fd1 = (abb1_control(&[s], &[gamma], &[h])[0] - abb1_control(&[s], &[gamma], &[-h])[0])
            / (2.0 * h);
        let analytic1 = -s * gamma / 2.0;
        assert!(((fd1 - analytic1) / analytic1).abs() < 1e-6);

        let fd2 = (abb2_control(&[s], &[eta], &[h])[0] - abb2_control(&[s], &[eta], &[-h])[0])
            / (2.0 * h);
        let analytic2 = -s / eta;
        assert!(((fd2 - analytic2) / analytic2).abs() < 1e-6);
    }

    #[test]
    fn switching_controller_transitions_once() {
        let (sys, obs) = two_level_setup();
        let mut ctrl = Controller::new(ControllerConfig::switching(0.2, None), &sys, &obs).unwrap();
        assert!((ctrl.switch_gain - 0.4).abs() < 1e-15);
        assert_eq!(ctrl.mode_tag(), ModeTag::BangBang);

        // away from a zero point: bang-bang sign rule
        let rho = pure_state(0.7, 0.3);
        let u = eval_switching(&mut ctrl, 0.1, &rho).unwrap();
        assert!((u + 0.2).abs() < 1e-15);
        assert_eq!(ctrl.mode_tag(), ModeTag::BangBang);

        // zero point with the condition failing: hold zero, stay bang-bang
        let rho_low = pure_state(0.6, 0.0);
        let u = eval_switching(&mut ctrl, 0.0, &rho_low).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(ctrl.mode_tag(), ModeTag::BangBang);

        // zero point with rho_11 = 0.9 (condition holds): switch permanently
        let rho_high = pure_state(0.9, 0.0);
        let u = eval_switching(&mut ctrl, 0.0, &rho_high).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(ctrl.mode_tag(), ModeTag::Standard);

        // standard mode from now on, even away from zero points
        let u = eval_switching(&mut ctrl, 0.5, &rho).unwrap();
        assert!((u + 0.2).abs() < 1e-15);
        assert_eq!(ctrl.mode_tag(), ModeTag::Standard);
    }

    #[test]
    fn switching_on_initial_state_fails_condition() {
        // the reference initial state has a negative population difference
        let (sys, obs) = two_level_setup();
        let (_, _, rho0) = builtin_system(BuiltinSystem::TwoLevel);
        let mut ctrl = Controller::new(ControllerConfig::switching(0.2, None), &sys, &obs).unwrap();
        let u = eval_switching(&mut ctrl, 0.0, &rho0).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(ctrl.mode_tag(), ModeTag::BangBang);
    }

    #[test]
    fn switching_stays_zero_in_invariant_set() {
        let (sys, obs) = two_level_setup();
        let policy = NumericPolicy::default();
        let ground = Density::eigenstate(2, 1, &policy).unwrap();
        let mut ctrl = Controller::new(ControllerConfig::switching(0.2, None), &sys, &obs).unwrap();
        let u = eval_switching(&mut ctrl, 0.0, &ground).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(ctrl.mode_tag(), ModeTag::BangBang);
    }

    #[test]
    fn var_strength_replacement_examples() {
        let (sys, obs) = two_level_setup();

        // fixed-fraction rule at rho_11 = 0.9: S' = 0.9 * 0.4 * 0.3 / 0.8
        let mut ctrl = Controller::new(
            ControllerConfig::var_strength(0.2, 0.9, StrengthRule::FixedFraction),
            &sys,
            &obs,
        )
        .unwrap();
        let rho_high = pure_state(0.9, 0.0);
        let u = eval_var_strength(&mut ctrl, 0.0, &rho_high).unwrap();
        assert_eq!(u, 0.0);
        assert!((ctrl.state().current_strength - 0.135).abs() < 1e-12);

        // coefficient-varying rule: S' = 2 * 0.9 * 0.4 * 0.09 / 0.8
        let mut ctrl = Controller::new(
            ControllerConfig::var_strength(0.2, 0.9, StrengthRule::CoeffVarying),
            &sys,
            &obs,
        )
        .unwrap();
        eval_var_strength(&mut ctrl, 0.0, &rho_high).unwrap();
        assert!((ctrl.state().current_strength - 0.081).abs() < 1e-12);

        // a state failing the condition leaves the strength alone
        let mut ctrl = Controller::new(
            ControllerConfig::var_strength(0.2, 0.9, StrengthRule::FixedFraction),
            &sys,
            &obs,
        )
        .unwrap();
        let rho_low = pure_state(0.6, 0.0);
        eval_var_strength(&mut ctrl, 0.0, &rho_low).unwrap();
        assert_eq!(ctrl.state().current_strength, 0.2);
    }

    #[test]
    fn config_validation_catches_shape_errors() {
        let (sys, obs) = two_level_setup();
        assert!(Controller::new(ControllerConfig::standard(vec![]), &sys, &obs).is_err());
        assert!(Controller::new(ControllerConfig::standard(vec![-0.4]), &sys, &obs).is_err());
        assert!(Controller::new(ControllerConfig::abb1(vec![0.2], vec![]), &sys, &obs).is_err());
        assert!(
            Controller::new(ControllerConfig::abb2(vec![0.2], vec![-1.0]), &sys, &obs).is_err()
        );
        assert!(Controller::new(
            ControllerConfig::var_strength(0.2, 1.5, StrengthRule::FixedFraction),
            &sys,
            &obs
        )
        .is_err());
        // strengths above the admissible bound are rejected
        assert!(Controller::new(ControllerConfig::bang_bang(vec![0.5]), &sys, &obs).is_err());

        // switching family requires a two-level system
        let (xi, target, _) = builtin_system(BuiltinSystem::XiThreeLevel);
        let obs3 = build_p(target, 3, 1.0, 0.5).unwrap();
        assert!(Controller::new(ControllerConfig::switching(0.1, None), &xi, &obs3).is_err());
    }
}
