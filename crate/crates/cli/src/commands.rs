//! Subcommand implementations.

use std::path::{Path, PathBuf};

use qlyap_core::controllers::Controller;
use qlyap_core::invariant_set::{membership, target_isolated, MEMBERSHIP_TOL};
use qlyap_core::lyapunov::initial_excitation;
use qlyap_core::matrix::{fidelity, spectrum};
use qlyap_core::oscillation::{oscillation_condition, OscillationCheck, TwoLevelParams};
use qlyap_core::robustness::{check_bound, distance_bound, paired_run, sample_perturbation};
use qlyap_core::simulator::{run, time_to_fidelity, SimConfig, Trajectory};
use qlyap_core::{Density, NumericPolicy};

use crate::csvio::{atomic_write, comparison_csv, fmt_f64, parse_trajectory_csv, trajectory_csv};
use crate::pool::run_indexed;
use crate::scenario::Scenario;
use crate::svg::{line_chart, Series};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

fn map_run_error(e: qlyap_core::Error) -> CliError {
    use qlyap_core::Error as E;
    match e {
        E::ConditionViolation { .. }
        | E::InvalidParameter { .. }
        | E::DimensionMismatch { .. }
        | E::DimensionOutOfRange { .. }
        | E::UnknownBuiltin { .. }
        | E::UncoupledControl { .. }
        | E::NotHermitian { .. } => CliError::validation(e.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

/// Run one scenario, applying the sinusoidal kick first when the initial
/// state has no overlap with the target.
pub fn execute_scenario(scenario: &Scenario) -> Result<(Trajectory, Option<f64>), CliError> {
    let controller = Controller::new(
        scenario.controller.clone(),
        &scenario.system,
        &scenario.observable,
    )
    .map_err(map_run_error)?;

    let rf = scenario.target.projector(scenario.system.dim());
    let overlap = fidelity(&scenario.initial, &rf).map_err(map_run_error)?;
    let (start_state, kick_duration) = if overlap <= 1e-10 {
        let (schedule, reached) = initial_excitation(
            &scenario.system,
            scenario.target,
            &scenario.initial,
            None,
            None,
            scenario.sim.dt,
        )
        .map_err(map_run_error)?;
        (reached, Some(schedule.t0))
    } else {
        (scenario.initial.clone(), None)
    };

    let traj = run(
        &scenario.system,
        &scenario.observable,
        controller,
        &start_state,
        &scenario.sim,
    )
    .map_err(map_run_error)?;
    Ok((traj, kick_duration))
}

fn flag_counts(traj: &Trajectory) -> String {
    let mut zero = 0;
    let mut switched = 0;
    let mut stall = 0;
    let mut degraded = 0;
    for s in &traj.samples {
        zero += s.flags.zero_point as usize;
        switched += s.flags.switched as usize;
        stall += s.flags.invariant_stall as usize;
        degraded += s.flags.bisection_degraded as usize;
    }
    format!("zero_point {zero}, switched {switched}, invariant_stall {stall}, degraded {degraded}")
}

fn print_summary(name: &str, scenario: &Scenario, traj: &Trajectory, kick: Option<f64>) {
    println!(
        "scenario     : {name} ({} levels, target level {}, energies in {})",
        scenario.system.dim(),
        scenario.target.index() + 1,
        scenario.system.unit
    );
    println!("controller   : {}", scenario.controller.family.name());
    if let Some(t0) = kick {
        println!("excitation   : sinusoidal kick applied on [0, {t0:.6}] before feedback");
    }
    println!("final fidelity: {:.9}", traj.final_fidelity);
    println!("final V       : {:.9}", traj.final_v);
    for (th, cross) in &traj.threshold_crossings {
        match cross {
            Some(t) => println!("time to fidelity {th}: {t:.6}"),
            None => println!("time to fidelity {th}: not reached"),
        }
    }
    match traj.chattering_onset {
        Some(t) => println!("chattering    : detected from t = {t:.4}"),
        None => println!("chattering    : none"),
    }
    println!(
        "peak |u_k|    : {}",
        traj.peak_control
            .iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if traj.clamp_events > 0 {
        println!("clamped steps : {}", traj.clamp_events);
    }
    println!("events        : {}", flag_counts(traj));
}

fn write_charts(name: &str, traj: &Trajectory, out: &OutputOptions) -> Result<(), CliError> {
    let fid: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.fidelity)).collect();
    let v: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.v)).collect();
    let chart = line_chart(
        &format!("{name}: fidelity and V"),
        "t",
        "value",
        &[
            Series {
                label: "fidelity".into(),
                points: &fid,
            },
            Series {
                label: "V".into(),
                points: &v,
            },
        ],
    );
    atomic_write(&out.dir.join(format!("{name}_fidelity.svg")), &chart)?;

    let m = traj.peak_control.len();
    let controls: Vec<Vec<(f64, f64)>> = (0..m)
        .map(|k| traj.samples.iter().map(|s| (s.t, s.u[k])).collect())
        .collect();
    let series: Vec<Series> = controls
        .iter()
        .enumerate()
        .map(|(k, pts)| Series {
            label: format!("u_{}", k + 1),
            points: pts,
        })
        .collect();
    let chart = line_chart(&format!("{name}: control fields"), "t", "u", &series);
    atomic_write(&out.dir.join(format!("{name}_controls.svg")), &chart)?;
    Ok(())
}

pub fn cmd_simulate(scenario: &Scenario, out: &OutputOptions) -> Result<(), CliError> {
    let (traj, kick) = execute_scenario(scenario)?;
    let csv = trajectory_csv(&traj, None);
    let path = out.dir.join(format!("{}_trajectory.csv", scenario.name));
    atomic_write(&path, &csv)?;
    print_summary(&scenario.name, scenario, &traj, kick);
    if out.svg {
        write_charts(&scenario.name, &traj, out)?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_compare(
    scenarios: &[Scenario],
    out: &OutputOptions,
    workers: usize,
) -> Result<(), CliError> {
    if scenarios.is_empty() {
        return Err(CliError::validation(
            "compare needs at least one scenario".into(),
        ));
    }
    let signature = scenarios[0].system_signature();
    for s in scenarios.iter().skip(1) {
        if s.system_signature() != signature {
            return Err(CliError::validation(format!(
                "scenario `{}` runs a different system/target than `{}`",
                s.name, scenarios[0].name
            )));
        }
    }
    let results = run_indexed(scenarios.len(), workers, |i| {
        execute_scenario(&scenarios[i])
    });
    let mut trajs = Vec::with_capacity(scenarios.len());
    for (scenario, result) in scenarios.iter().zip(results) {
        let (traj, _) = result.map_err(|e| {
            CliError::with_kind(e.kind(), format!("{}: {}", scenario.name, e.message()))
        })?;
        trajs.push((scenario.name.clone(), traj));
    }

    let entries: Vec<(String, &Trajectory)> = trajs.iter().map(|(n, t)| (n.clone(), t)).collect();
    let csv = comparison_csv(&entries)?;
    let path = out.dir.join("compare.csv");
    atomic_write(&path, &csv)?;

    for th in &scenarios[0].sim.fidelity_targets {
        let mut ranking: Vec<(String, Option<f64>)> = trajs
            .iter()
            .map(|(n, t)| (n.clone(), time_to_fidelity(t, *th)))
            .collect();
        ranking.sort_by(|a, b| match (a.1, b.1) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        println!("ranking at fidelity {th}:");
        for (rank, (name, time)) in ranking.iter().enumerate() {
            match time {
                Some(t) => println!("  {}. {name}  t = {t:.6}", rank + 1),
                None => println!("  {}. {name}  not reached", rank + 1),
            }
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// The sweepable parameters: gamma_k, eta_k, S_k, K_k (one-based channel), dt.
fn apply_sweep_value(base: &Scenario, param: &str, value: f64) -> Result<Scenario, CliError> {
    let mut doc = base.doc.clone();
    let bad_channel = |k: usize| {
        CliError::validation(format!(
            "parameter channel {k} outside the system's control count"
        ))
    };
    if param == "dt" {
        if let Some(sim) = doc.sim.as_mut() {
            sim.dt = Some(value);
        }
    } else if let Some((kind, idx)) = param.split_once('_') {
        let k: usize = idx
            .parse()
            .map_err(|_| CliError::validation(format!("bad parameter channel in `{param}`")))?;
        if k == 0 {
            return Err(bad_channel(k));
        }
        let slot = k - 1;
        let ctrl = &mut doc.controller;
        let vec_set = |v: &mut Option<Vec<f64>>, what: &str| -> Result<(), CliError> {
            match v.as_mut() {
                Some(values) if slot < values.len() => {
                    values[slot] = value;
                    Ok(())
                }
                _ => Err(CliError::validation(format!(
                    "scenario controller carries no {what} for channel {k}"
                ))),
            }
        };
        match kind {
            "gamma" => vec_set(&mut ctrl.gamma, "gamma")?,
            "eta" => vec_set(&mut ctrl.eta, "eta")?,
            "S" => vec_set(&mut ctrl.strengths, "strength")?,
            "K" => vec_set(&mut ctrl.gains, "gain")?,
            other => {
                return Err(CliError::validation(format!(
                "unknown sweep parameter `{other}_{k}` (supported: gamma_k, eta_k, S_k, K_k, dt)"
            )))
            }
        }
    } else {
        return Err(CliError::validation(format!(
            "unknown sweep parameter `{param}` (supported: gamma_k, eta_k, S_k, K_k, dt)"
        )));
    }
    Scenario::from_doc(doc)
}

pub fn cmd_sweep(
    base: &Scenario,
    param: &str,
    values: &[f64],
    out: &OutputOptions,
    workers: usize,
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::validation(
            "sweep needs a non-empty value list".into(),
        ));
    }
    let variants: Vec<Scenario> = values
        .iter()
        .map(|&v| apply_sweep_value(base, param, v))
        .collect::<Result<_, _>>()?;
    let results = run_indexed(variants.len(), workers, |i| execute_scenario(&variants[i]));

    let thresholds = base.sim.fidelity_targets.clone();
    let mut header = vec![param.to_string(), "final_fidelity".into()];
    for th in &thresholds {
        header.push(format!("t_{th}"));
    }
    let mut csv = header.join(",");
    csv.push('\n');
    println!("sweep of {param} on `{}`:", base.name);
    for (&value, result) in values.iter().zip(results) {
        let (traj, _) = result.map_err(|e| {
            CliError::with_kind(e.kind(), format!("{param} = {value}: {}", e.message()))
        })?;
        let mut fields = vec![fmt_f64(value), fmt_f64(traj.final_fidelity)];
        let mut shown = Vec::new();
        for th in &thresholds {
            match time_to_fidelity(&traj, *th) {
                Some(t) => {
                    fields.push(fmt_f64(t));
                    shown.push(format!("t_{th} = {t:.4}"));
                }
                None => {
                    fields.push("nan".into());
                    shown.push(format!("t_{th} = -"));
                }
            }
        }
        csv.push_str(&fields.join(","));
        csv.push('\n');
        println!(
            "  {param} = {value:<8}: final = {:.6}, {}",
            traj.final_fidelity,
            shown.join(", ")
        );
    }
    let path = out.dir.join(format!("sweep_{param}.csv"));
    atomic_write(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_robustness(
    scenario: &Scenario,
    epsilons: &[f64],
    seeds: u64,
    base_seed: u64,
    out: &OutputOptions,
    workers: usize,
) -> Result<(), CliError> {
    if epsilons.is_empty() {
        return Err(CliError::validation(
            "robustness needs at least one epsilon".into(),
        ));
    }
    if seeds == 0 {
        return Err(CliError::validation(
            "robustness needs at least one seed".into(),
        ));
    }
    let grid: Vec<(f64, u64)> = epsilons
        .iter()
        .flat_map(|&e| (0..seeds).map(move |s| (e, base_seed + s)))
        .collect();

    let results = run_indexed(grid.len(), workers, |i| -> Result<_, CliError> {
        let (eps, seed) = grid[i];
        let pert = sample_perturbation(&scenario.system, scenario.target, eps, seed)
            .map_err(map_run_error)?;
        let controller = Controller::new(
            scenario.controller.clone(),
            &scenario.system,
            &scenario.observable,
        )
        .map_err(map_run_error)?;
        let paired = paired_run(
            &scenario.system,
            &pert,
            &scenario.observable,
            controller,
            &scenario.initial,
            &scenario.sim,
        )
        .map_err(map_run_error)?;
        Ok((eps, seed, paired))
    });

    let mut csv = String::from("seed,epsilon,t,distance,bound,margin\n");
    let mut violations = 0usize;
    println!(
        "robustness sweep on `{}` ({} runs):",
        scenario.name,
        grid.len()
    );
    for result in results {
        let (eps, seed, paired) = result?;
        let report = check_bound(&paired.distance, eps);
        for &(t, d) in &paired.distance {
            let bound = distance_bound(t, eps);
            let fields = [
                seed.to_string(),
                fmt_f64(eps),
                fmt_f64(t),
                fmt_f64(d),
                fmt_f64(bound),
                fmt_f64(bound - d),
            ];
            csv.push_str(&fields.join(","));
            csv.push('\n');
        }
        let final_distance = paired.distance.last().map(|&(_, d)| d).unwrap_or(0.0);
        println!(
            "  eps = {eps:<8} seed = {seed:<4} min margin = {:+.3e} at t = {:.4}, final distance = {:.6e}{}",
            report.min_margin,
            report.worst_t,
            final_distance,
            if report.satisfied { "" } else { "  BOUND VIOLATION" }
        );
        if !report.satisfied {
            violations += 1;
        }
    }
    let path = out.dir.join("robustness.csv");
    atomic_write(&path, &csv)?;
    println!("wrote {}", path.display());
    if violations > 0 {
        return Err(CliError::runtime(format!(
            "{violations} run(s) violated the distance bound; this indicates an implementation bug"
        )));
    }
    Ok(())
}

pub fn cmd_analyze(trajectory_path: &Path, scenario: &Scenario) -> Result<(), CliError> {
    let text = std::fs::read_to_string(trajectory_path).map_err(|e| {
        CliError::validation(format!("cannot read {}: {e}", trajectory_path.display()))
    })?;
    let parsed = parse_trajectory_csv(&text)?;
    if parsed.channels != scenario.system.num_controls() {
        return Err(CliError::validation(format!(
            "trajectory has {} control channels, scenario has {}",
            parsed.channels,
            scenario.system.num_controls()
        )));
    }
    let final_t = parsed.rows.last().expect("non-empty").t;
    if final_t <= scenario.sim.dt {
        return Err(CliError::validation(
            "trajectory too short to analyze".into(),
        ));
    }

    // the CSV stores summaries; recover the final state by re-simulation
    let mut replay = scenario.clone();
    replay.sim = SimConfig {
        horizon: final_t,
        ..scenario.sim.clone()
    };
    let (traj, _) = execute_scenario(&replay)?;
    let final_state: &Density = &traj.samples.last().expect("non-empty").rho;

    let policy = NumericPolicy::<f64>::default();
    let init_spec = spectrum(scenario.initial.matrix(), &policy).map_err(map_run_error)?;
    let report = membership(
        &scenario.system,
        &scenario.observable,
        &init_spec,
        final_state,
        MEMBERSHIP_TOL,
    )
    .map_err(map_run_error)?;
    println!("invariant-set membership of the final state (t = {final_t:.4}):");
    println!("  residual_im    : {:.6e}", report.residual_im);
    println!("  residual_re    : {:.6e}", report.residual_re);
    println!("  spectrum match : {}", report.spectrum_match);
    println!("  in set         : {}", report.in_set);

    match target_isolated(&scenario.system, &scenario.observable, &scenario.initial) {
        Ok(class) => {
            println!("invariant-set classification:");
            println!("  E1: {}", class.e1);
            println!("  E2: {}", class.e2);
            if let Some([f, g]) = class.eigenstate_set {
                println!(
                    "  two-level set: {{|{}><{}|, |{}><{}|}}",
                    f + 1,
                    f + 1,
                    g + 1,
                    g + 1
                );
            }
        }
        Err(e) => println!("isolation hypotheses do not hold: {e}"),
    }

    if scenario.system.dim() == 2 && scenario.system.num_controls() == 1 {
        let params = TwoLevelParams::from_system(&scenario.system, &scenario.observable, None)
            .map_err(map_run_error)?;
        println!(
            "chattering condition along the run (threshold omega/S = {:.6}):",
            params.condition_rhs(params.strength)
        );
        let zero_points: Vec<_> = traj.samples.iter().filter(|s| s.flags.zero_point).collect();
        let total = zero_points.len();
        let rows: Vec<&qlyap_core::simulator::Sample> = if zero_points.is_empty() {
            traj.samples
                .iter()
                .step_by((traj.samples.len() / 20).max(1))
                .collect()
        } else {
            zero_points.into_iter().take(100).collect()
        };
        for s in rows {
            let check = oscillation_condition(&params, &s.rho);
            let lhs = params
                .condition_lhs(&s.rho)
                .map(|x| format!("{x:+.6}"))
                .unwrap_or_else(|| "coherence ~ 0".into());
            let verdict = match check {
                OscillationCheck::Holds => "holds",
                OscillationCheck::Fails => "fails",
                OscillationCheck::InvariantSet => "invariant set",
            };
            println!(
                "  t = {:>10.4}  lhs = {lhs}  {verdict}{}",
                s.t,
                if s.flags.zero_point {
                    "  [zero point]"
                } else {
                    ""
                }
            );
        }
        if total > 100 {
            println!("  ... {} more zero points", total - 100);
        }
    }
    Ok(())
}
