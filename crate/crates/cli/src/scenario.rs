//! Scenario files: one JSON document describing system, target, observable,
//! controller, simulation grid, and optional perturbation settings.
//!
//! Complex numbers are `[re, im]` pairs and level indices are one-based in
//! the file (converted at the boundary; the library is zero-based).

use serde::{Deserialize, Serialize};

use qlyap_core::controllers::{ControlFamily, ControllerConfig, StrengthRule};
use qlyap_core::lyapunov::{build_p, observable_from_diag, LyapunovObservable};
use qlyap_core::matrix::DensityMatrix;
use qlyap_core::model::{builtin_system, BuiltinSystem, ControlChannel, QuantumSystem, TargetSpec};
use qlyap_core::simulator::SimConfig;
use qlyap_core::{CMatrix, Density, NumericPolicy, C64};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Raw scenario document as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    pub name: String,
    pub system: SystemDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableDoc>,
    pub controller: ControllerDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputDoc>,
}

/// Default output destination and formats; command-line flags take
/// precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemDoc {
    Builtin {
        builtin: String,
    },
    Inline {
        h0_diag: Vec<f64>,
        controls: Vec<ControlDoc>,
        #[serde(skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDoc {
    pub h: Vec<Vec<[f64; 2]>>,
    pub s_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableDoc {
    Gap { p: f64, p_f: f64 },
    Diagonal { diag: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerDoc {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strengths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strength_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_targets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDoc {
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub name: String,
    pub system: QuantumSystem,
    pub target: TargetSpec,
    pub initial: Density,
    pub observable: LyapunovObservable,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub perturbation: Option<PerturbationDoc>,
}

fn complex_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, CliError> {
    let converted: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    CMatrix::from_rows(&converted)
        .map_err(|e| CliError::validation(format!("bad matrix in scenario: {e}")))
}

impl Scenario {
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, CliError> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.name.is_empty() {
            return Err(CliError::validation(
                "scenario `name` must be non-empty".into(),
            ));
        }

        let policy = NumericPolicy::<f64>::default();
        let (system, default_target, default_initial, builtin) = match &doc.system {
            SystemDoc::Builtin { builtin } => {
                let which = BuiltinSystem::parse(builtin)
                    .map_err(|e| CliError::validation(e.to_string()))?;
                let (sys, target, rho0) = builtin_system(which);
                (sys, Some(target), Some(rho0), Some(which))
            }
            SystemDoc::Inline {
                h0_diag,
                controls,
                unit,
            } => {
                let channels: Vec<ControlChannel> = controls
                    .iter()
                    .map(|c| {
                        Ok(ControlChannel {
                            hamiltonian: complex_matrix(&c.h)?,
                            s_max: c.s_max,
                            label: c.label.clone(),
                        })
                    })
                    .collect::<Result<_, CliError>>()?;
                let sys = QuantumSystem::new(
                    h0_diag.clone(),
                    channels,
                    unit.clone().unwrap_or_else(|| "arb".into()),
                )
                .map_err(|e| CliError::validation(format!("system: {e}")))?;
                (sys, None, None, None)
            }
        };

        let dim = system.dim();
        let target = match doc.target {
            Some(one_based) => {
                if one_based == 0 || one_based > dim {
                    return Err(CliError::validation(format!(
                        "target level {one_based} outside 1..={dim}"
                    )));
                }
                TargetSpec::new(one_based - 1, dim).expect("validated")
            }
            None => default_target.ok_or_else(|| {
                CliError::validation("inline systems need an explicit `target`".into())
            })?,
        };

        let initial = match &doc.initial {
            Some(rows) => {
                let mat = complex_matrix(rows)?;
                DensityMatrix::new(mat, &policy)
                    .map_err(|e| CliError::validation(format!("initial state: {e}")))?
            }
            None => default_initial.ok_or_else(|| {
                CliError::validation("inline systems need an explicit `initial` state".into())
            })?,
        };
        if initial.dim() != dim {
            return Err(CliError::validation(
                "initial state dimension mismatch".into(),
            ));
        }

        let observable = match &doc.observable {
            Some(ObservableDoc::Gap { p, p_f }) => build_p(target, dim, *p, *p_f),
            Some(ObservableDoc::Diagonal { diag }) => observable_from_diag(target, diag),
            None => build_p(target, dim, 1.0, 0.5),
        }
        .map_err(|e| CliError::validation(format!("observable: {e}")))?;

        let controller = controller_config(&doc.controller)?;

        // the two-qubit system runs on a finer default grid
        let default_dt = match builtin {
            Some(BuiltinSystem::TwoQubitSc) => 1e-4,
            _ => 1e-3,
        };
        let sim_doc = doc.sim.clone().unwrap_or(SimDoc {
            dt: None,
            horizon: None,
            record_stride: None,
            zero_tol: None,
            fidelity_targets: None,
        });
        let sim = SimConfig {
            dt: sim_doc.dt.unwrap_or(default_dt),
            horizon: sim_doc.horizon.unwrap_or(10.0),
            record_stride: sim_doc.record_stride.unwrap_or(10),
            zero_tol: sim_doc.zero_tol.unwrap_or(controller.zero_tol),
            fidelity_targets: sim_doc.fidelity_targets.unwrap_or_else(|| vec![0.95, 0.99]),
        };
        sim.validate()
            .map_err(|e| CliError::validation(format!("sim: {e}")))?;

        Ok(Scenario {
            name: doc.name.clone(),
            perturbation: doc.perturbation.clone(),
            doc,
            system,
            target,
            initial,
            observable,
            controller,
            sim,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: ScenarioDoc = serde_json::from_str(text)
            .map_err(|e| CliError::validation(format!("scenario parse error: {e}")))?;
        Self::from_doc(doc)
    }

    /// Load from a path, or from the embedded set via `builtin:<name>`.
    pub fn load(spec: &str) -> Result<Self, CliError> {
        if let Some(name) = spec.strip_prefix("builtin:") {
            let text = builtin_scenario_text(name).ok_or_else(|| {
                CliError::validation(format!(
                    "unknown builtin scenario `{name}`; available: {}",
                    BUILTIN_SCENARIOS
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?;
            return Self::parse(text);
        }
        let text = std::fs::read_to_string(spec)
            .map_err(|e| CliError::validation(format!("cannot read scenario `{spec}`: {e}")))?;
        Self::parse(&text)
    }

    /// Identifier of the underlying system for compatibility checks.
    pub fn system_signature(&self) -> (Vec<u64>, usize) {
        let bits: Vec<u64> = self.system.h0_diag().iter().map(|x| x.to_bits()).collect();
        (bits, self.target.index())
    }
}

fn controller_config(doc: &ControllerDoc) -> Result<ControllerConfig, CliError> {
    let family =
        ControlFamily::parse(&doc.family).map_err(|e| CliError::validation(e.to_string()))?;
    let rule = match doc.strength_rule.as_deref() {
        None | Some("fixed_fraction") => StrengthRule::FixedFraction,
        Some("coeff_varying") => StrengthRule::CoeffVarying,
        Some(other) => {
            return Err(CliError::validation(format!(
                "unknown strength_rule `{other}`"
            )))
        }
    };
    let mut cfg = match family {
        ControlFamily::Standard => {
            ControllerConfig::standard(doc.gains.clone().unwrap_or_default())
        }
        ControlFamily::BangBang => {
            ControllerConfig::bang_bang(doc.strengths.clone().unwrap_or_default())
        }
        ControlFamily::Abb1 => ControllerConfig::abb1(
            doc.strengths.clone().unwrap_or_default(),
            doc.gamma.clone().unwrap_or_default(),
        ),
        ControlFamily::Abb2 => ControllerConfig::abb2(
            doc.strengths.clone().unwrap_or_default(),
            doc.eta.clone().unwrap_or_default(),
        ),
        ControlFamily::SwitchBbStd => {
            let strength = doc
                .strengths
                .as_ref()
                .and_then(|s| s.first().copied())
                .ok_or_else(|| {
                    CliError::validation("switch_bb_std needs `strengths: [S]`".into())
                })?;
            ControllerConfig::switching(
                strength,
                doc.gains.as_ref().and_then(|g| g.first().copied()),
            )
        }
        ControlFamily::SwitchVarStrength => {
            let strength = doc
                .strengths
                .as_ref()
                .and_then(|s| s.first().copied())
                .ok_or_else(|| {
                    CliError::validation("switch_var_strength needs `strengths: [S]`".into())
                })?;
            ControllerConfig::var_strength(strength, doc.mu.unwrap_or(0.9), rule)
        }
    };
    if let Some(z) = doc.zero_tol {
        cfg.zero_tol = z;
    }
    Ok(cfg)
}

/// Scenario documents shipped with the binary, mirroring the benchmark runs.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    (
        "two_level_standard",
        include_str!("../scenarios/two_level_standard.json"),
    ),
    (
        "two_level_bang_bang",
        include_str!("../scenarios/two_level_bang_bang.json"),
    ),
    (
        "two_level_switching",
        include_str!("../scenarios/two_level_switching.json"),
    ),
    (
        "two_level_abb1",
        include_str!("../scenarios/two_level_abb1.json"),
    ),
    (
        "two_level_var_strength",
        include_str!("../scenarios/two_level_var_strength.json"),
    ),
    ("xi_standard", include_str!("../scenarios/xi_standard.json")),
    ("xi_abb1", include_str!("../scenarios/xi_abb1.json")),
    (
        "two_qubit_standard",
        include_str!("../scenarios/two_qubit_standard.json"),
    ),
    (
        "two_qubit_abb2",
        include_str!("../scenarios/two_qubit_abb2.json"),
    ),
];

pub fn builtin_scenario_text(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}
