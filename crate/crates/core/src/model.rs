//! Controllable closed-system definition and structural condition checks.
//!
//! The internal Hamiltonian is stored in the energy representation (diagonal
//! only); off-diagonal internal Hamiltonians are rejected rather than
//! auto-diagonalized, because the observable construction and the invariant
//! set machinery both depend on working in this basis.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matrix::DensityMatrix;
use crate::scalar::NumericPolicy;
use crate::{CMatrix, Density};

/// Default tolerance for distinguishing transition frequencies.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// One control field: its Hamiltonian and maximum admissible strength.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlChannel {
    pub hamiltonian: CMatrix,
    pub s_max: f64,
    pub label: Option<String>,
}

/// An N-level closed quantum system with diagonal internal Hamiltonian and
/// bounded control fields.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSystem {
    dim: usize,
    h0_diag: Vec<f64>,
    controls: Vec<ControlChannel>,
    /// Unit label for energies/frequencies (reporting only; dynamics use hbar = 1).
    pub unit: String,
}

impl QuantumSystem {
    pub fn new(
        h0_diag: Vec<f64>,
        controls: Vec<ControlChannel>,
        unit: impl Into<String>,
    ) -> Result<Self> {
        let dim = h0_diag.len();
        if !(2..=64).contains(&dim) {
            return Err(Error::DimensionOutOfRange { dim });
        }
        if controls.is_empty() {
            return Err(Error::InvalidParameter {
                what: "system needs at least one control".into(),
            });
        }
        let policy = NumericPolicy::<f64>::default();
        for (k, ctrl) in controls.iter().enumerate() {
            if ctrl.hamiltonian.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ctrl.hamiltonian.dim(),
                });
            }
            if !ctrl.hamiltonian.is_hermitian(policy.herm_tol) {
                return Err(Error::NotHermitian {
                    max_residual: ctrl.hamiltonian.hermiticity_residual(),
                });
            }
            if ctrl.s_max.is_nan() || ctrl.s_max <= 0.0 {
                return Err(Error::InvalidParameter {
                    what: format!("control {k} has non-positive max strength {}", ctrl.s_max),
                });
            }
        }
        Ok(QuantumSystem {
            dim,
            h0_diag,
            controls,
            unit: unit.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h0_diag(&self) -> &[f64] {
        &self.h0_diag
    }

    pub fn controls(&self) -> &[ControlChannel] {
        &self.controls
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    /// Strength bounds S_k for all channels.
    pub fn strengths(&self) -> Vec<f64> {
        self.controls.iter().map(|c| c.s_max).collect()
    }

    /// Internal Hamiltonian as a full (diagonal) matrix.
    pub fn h0_matrix(&self) -> CMatrix {
        CMatrix::from_diag(&self.h0_diag)
    }

    /// Total Hamiltonian H0 + sum_k u_k H_k for given control values.
    pub fn hamiltonian(&self, u: &[f64]) -> Result<CMatrix> {
        if u.len() != self.controls.len() {
            return Err(Error::DimensionMismatch {
                expected: self.controls.len(),
                found: u.len(),
            });
        }
        let mut h = self.h0_matrix();
        for (uk, ctrl) in u.iter().zip(&self.controls) {
            if *uk != 0.0 {
                h = h.add(&ctrl.hamiltonian.scale(*uk))?;
            }
        }
        Ok(h)
    }

    /// Transition frequency omega_ab = lambda_a - lambda_b.
    pub fn transition_frequency(&self, a: usize, b: usize) -> f64 {
        self.h0_diag[a] - self.h0_diag[b]
    }
}

/// All ordered-pair transition frequencies omega_ab = lambda_a - lambda_b.
pub fn transition_frequencies(sys: &QuantumSystem) -> BTreeMap<(usize, usize), f64> {
    let mut map = BTreeMap::new();
    for a in 0..sys.dim() {
        for b in 0..sys.dim() {
            map.insert((a, b), sys.transition_frequency(a, b));
        }
    }
    map
}

/// The target eigenstate of the internal Hamiltonian (zero-based level index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetSpec {
    index: usize,
}

impl TargetSpec {
    pub fn new(index: usize, dim: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter {
                what: format!("target index {index} for dim {dim}"),
            });
        }
        Ok(TargetSpec { index })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Target projector rho_f = |lambda_f><lambda_f|.
    pub fn projector(&self, dim: usize) -> Density {
        DensityMatrix::eigenstate(dim, self.index, &NumericPolicy::default())
            .expect("valid eigenstate projector")
    }
}

/// A pair of target transition frequencies that are not distinguishable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyClash {
    pub a: usize,
    pub b: usize,
    pub omega_af: f64,
    pub omega_bf: f64,
}

/// Outcome of checking the distinguishable-frequency and direct-coupling
/// requirements for a target level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub cond2_ok: bool,
    pub cond2_violations: Vec<FrequencyClash>,
    pub cond3_ok: bool,
    pub cond3_uncoupled: Vec<usize>,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.cond2_ok && self.cond3_ok
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.cond2_ok {
            parts.push(format!(
                "{} indistinguishable frequency pair(s)",
                self.cond2_violations.len()
            ));
        }
        if !self.cond3_ok {
            let levels: Vec<String> = self
                .cond3_uncoupled
                .iter()
                .map(|j| (j + 1).to_string())
                .collect();
            parts.push(format!(
                "level(s) {} uncoupled from target",
                levels.join(",")
            ));
        }
        if parts.is_empty() {
            "ok".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Check that transition frequencies to the target are pairwise distinct (and
/// the internal Hamiltonian non-degenerate), and that every other level is
/// directly coupled to the target by some control.
pub fn check_conditions(sys: &QuantumSystem, target: TargetSpec, tol: f64) -> ConditionReport {
    let f = target.index();
    let n = sys.dim();
    let mut violations = Vec::new();

    for a in 0..n {
        for b in (a + 1)..n {
            if a == f || b == f {
                // degeneracy involving the target shows up as omega_af == 0
                if (sys.h0_diag()[a] - sys.h0_diag()[b]).abs() <= tol {
                    let (x, y) = if b == f { (a, b) } else { (b, a) };
                    violations.push(FrequencyClash {
                        a: x,
                        b: y,
                        omega_af: sys.transition_frequency(x, f),
                        omega_bf: 0.0,
                    });
                }
                continue;
            }
            let waf = sys.transition_frequency(a, f);
            let wbf = sys.transition_frequency(b, f);
            if (waf - wbf).abs() <= tol {
                violations.push(FrequencyClash {
                    a,
                    b,
                    omega_af: waf,
                    omega_bf: wbf,
                });
            }
        }
    }

    let mut uncoupled = Vec::new();
    for j in 0..n {
        if j == f {
            continue;
        }
        let coupled = sys
            .controls()
            .iter()
            .any(|ctrl| ctrl.hamiltonian[(j, f)].norm() > tol);
        if !coupled {
            uncoupled.push(j);
        }
    }

    ConditionReport {
        cond2_ok: violations.is_empty(),
        cond2_violations: violations,
        cond3_ok: uncoupled.is_empty(),
        cond3_uncoupled: uncoupled,
    }
}

/// The benchmark systems shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinSystem {
    /// Two-level system: H0 = diag(0.4, 0), one sigma_x-type control, S = 0.2.
    TwoLevel,
    /// Ladder-coupled three-level system, one control, S = 0.1, target level 2.
    XiThreeLevel,
    /// Two coupled charge qubits with fixed z-drives folded into H0 (GHz units).
    TwoQubitSc,
}

impl BuiltinSystem {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "two_level" => Ok(BuiltinSystem::TwoLevel),
            "xi_three_level" => Ok(BuiltinSystem::XiThreeLevel),
            "two_qubit_sc" => Ok(BuiltinSystem::TwoQubitSc),
            other => Err(Error::UnknownBuiltin { name: other.into() }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinSystem::TwoLevel => "two_level",
            BuiltinSystem::XiThreeLevel => "xi_three_level",
            BuiltinSystem::TwoQubitSc => "two_qubit_sc",
        }
    }
}

/// Construct a builtin system with its target and initial state.
pub fn builtin_system(which: BuiltinSystem) -> (QuantumSystem, TargetSpec, Density) {
    let policy = NumericPolicy::<f64>::default();
    match which {
        BuiltinSystem::TwoLevel => {
            let h1 = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
            let sys = QuantumSystem::new(
                vec![0.4, 0.0],
                vec![ControlChannel {
                    hamiltonian: h1,
                    s_max: 0.2,
                    label: Some("u1".into()),
                }],
                "arb",
            )
            .unwrap();
            let target = TargetSpec::new(0, 2).unwrap();
            let s5 = 5.0f64.sqrt();
            let rho0 = DensityMatrix::new(
                CMatrix::from_real_rows(&[vec![1.0 / 6.0, s5 / 6.0], vec![s5 / 6.0, 5.0 / 6.0]])
                    .unwrap(),
                &policy,
            )
            .unwrap();
            (sys, target, rho0)
        }
        BuiltinSystem::XiThreeLevel => {
            let h1 = CMatrix::from_real_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
            ])
            .unwrap();
            let sys = QuantumSystem::new(
                vec![0.0, 0.3, 0.9],
                vec![ControlChannel {
                    hamiltonian: h1,
                    s_max: 0.1,
                    label: Some("u1".into()),
                }],
                "arb",
            )
            .unwrap();
            let target = TargetSpec::new(1, 3).unwrap();
            let third = 1.0 / 3.0;
            let rho0 = DensityMatrix::new(
                CMatrix::from_real_rows(&[
                    vec![third, third, third],
                    vec![third, third, third],
                    vec![third, third, third],
                ])
                .unwrap(),
                &policy,
            )
            .unwrap();
            (sys, target, rho0)
        }
        BuiltinSystem::TwoQubitSc => {
            let sx = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
            let id2 = CMatrix::identity(2);
            let h1 = sx.kron(&id2);
            let h2 = id2.kron(&sx);
            let h3 = sx.kron(&sx);
            // Fixed z-drives u1z = 10 GHz and u2z = 5 GHz fold into the diagonal:
            // 10 sigma_z x I + 5 I x sigma_z = diag(15, 5, -5, -15).
            let sys = QuantumSystem::new(
                vec![15.0, 5.0, -5.0, -15.0],
                vec![
                    ControlChannel {
                        hamiltonian: h1,
                        s_max: 3.9,
                        label: Some("u1x".into()),
                    },
                    ControlChannel {
                        hamiltonian: h2,
                        s_max: 3.4,
                        label: Some("u2x".into()),
                    },
                    ControlChannel {
                        hamiltonian: h3,
                        s_max: 0.2,
                        label: Some("uxx".into()),
                    },
                ],
                "GHz",
            )
            .unwrap();
            let target = TargetSpec::new(0, 4).unwrap();
            let s13 = 13.0f64.sqrt();
            let psi: Vec<Complex<f64>> = [1.0, 1.0, 1.0, s13]
                .iter()
                .map(|&x| Complex::new(x / 4.0, 0.0))
                .collect();
            let rho0 = DensityMatrix::pure_state(&psi, &policy).unwrap();
            (sys, target, rho0)
        }
    }
}
