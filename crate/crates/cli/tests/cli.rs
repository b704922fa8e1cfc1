//! End-to-end tests of the `qlyap` binary: exit codes, file schemas, and
//! output determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qlyap_cli::scenario::{Scenario, ScenarioDoc, BUILTIN_SCENARIOS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qlyap"))
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qlyap-test-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn qlyap");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_code(cmd: &mut Command, expect: i32) -> Output {
    let out = cmd.output().expect("spawn qlyap");
    assert_eq!(
        out.status.code(),
        Some(expect),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn help_lists_builtins() {
    let out = run_ok(bin().arg("--help"));
    let text = String::from_utf8_lossy(&out.stdout);
    for (name, _) in BUILTIN_SCENARIOS {
        assert!(text.contains(name), "missing builtin {name}");
    }
}

#[test]
fn no_arguments_is_a_usage_error() {
    run_code(&mut bin(), 2);
    run_code(bin().arg("frobnicate"), 2);
    run_code(bin().args(["simulate"]), 2);
    run_code(bin().args(["simulate", "--scenario"]), 2);
}

#[test]
fn simulate_bang_bang_reports_chattering() {
    let dir = work_dir("bb");
    let out = run_ok(bin().args([
        "simulate",
        "--scenario",
        "builtin:two_level_bang_bang",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("chattering    : detected from t ="), "{text}");
    let onset: f64 = text
        .lines()
        .find(|l| l.contains("chattering    : detected"))
        .and_then(|l| l.rsplit('=').next())
        .and_then(|v| v.trim().parse().ok())
        .expect("onset value");
    assert!((5.0..7.0).contains(&onset), "onset {onset}");

    let csv = fs::read_to_string(dir.join("two_level_bang_bang_trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,fidelity,V,u_1,T_1,mode,flags\n"));
    assert!(csv.contains("zero_point"));
    assert!(csv.contains("chattering"));
}

#[test]
fn simulate_abb1_converges_without_chattering() {
    let dir = work_dir("abb1");
    let out = run_ok(bin().args([
        "simulate",
        "--scenario",
        "builtin:two_level_abb1",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("chattering    : none"), "{text}");
    let final_fid: f64 = text
        .lines()
        .find(|l| l.starts_with("final fidelity"))
        .and_then(|l| l.rsplit(':').next())
        .and_then(|v| v.trim().parse().ok())
        .expect("fidelity value");
    assert!(final_fid > 0.99);
}

#[test]
fn simulate_output_is_deterministic() {
    let dir_a = work_dir("det-a");
    let dir_b = work_dir("det-b");
    for dir in [&dir_a, &dir_b] {
        run_ok(bin().args([
            "simulate",
            "--scenario",
            "builtin:two_level_switching",
            "--out",
            dir.to_str().unwrap(),
        ]));
    }
    let a = fs::read(dir_a.join("two_level_switching_trajectory.csv")).unwrap();
    let b = fs::read(dir_b.join("two_level_switching_trajectory.csv")).unwrap();
    assert_eq!(a, b, "trajectory CSVs differ between identical runs");
}

#[test]
fn malformed_scenarios_exit_2() {
    let dir = work_dir("bad");
    let path = dir.join("broken.json");
    fs::write(&path, "{\"schema_version\": 1").unwrap();
    let out = run_code(
        bin().args(["simulate", "--scenario", path.to_str().unwrap()]),
        2,
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    // schema violations, not just syntax errors
    fs::write(
        &path,
        r#"{"schema_version": 1, "name": "x", "system": {"builtin": "two_level"},
            "target": 7, "controller": {"family": "standard", "gains": [0.4]}}"#,
    )
    .unwrap();
    let out = run_code(
        bin().args(["simulate", "--scenario", path.to_str().unwrap()]),
        2,
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));

    run_code(
        bin().args(["simulate", "--scenario", "builtin:not_a_scenario"]),
        2,
    );
}

#[test]
fn compare_ranks_switching_first() {
    let dir = work_dir("cmp");
    let out = run_ok(bin().args([
        "compare",
        "--scenario",
        "builtin:two_level_switching",
        "--scenario",
        "builtin:two_level_abb1",
        "--scenario",
        "builtin:two_level_standard",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    let ranking_95: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.contains("ranking at fidelity 0.95"))
        .skip(1)
        .take(3)
        .collect();
    assert!(ranking_95[0].contains("two_level_switching"), "{text}");
    assert!(ranking_95[1].contains("two_level_abb1"), "{text}");
    assert!(ranking_95[2].contains("two_level_standard"), "{text}");

    let csv = fs::read_to_string(dir.join("compare.csv")).unwrap();
    assert!(csv.starts_with("law,t,fidelity,V,u_1,T_1,mode,flags\n"));
    for name in [
        "two_level_switching",
        "two_level_abb1",
        "two_level_standard",
    ] {
        assert!(csv.contains(name));
    }
}

#[test]
fn compare_rejects_mismatched_systems() {
    run_code(
        bin().args([
            "compare",
            "--scenario",
            "builtin:two_level_standard",
            "--scenario",
            "builtin:xi_standard",
        ]),
        2,
    );
}

#[test]
fn sweep_validates_parameters_and_writes_rows() {
    let dir = work_dir("sweep");
    run_code(
        bin().args([
            "sweep",
            "--scenario",
            "builtin:xi_abb1",
            "--param",
            "gamma_1",
        ]),
        2,
    );
    run_code(
        bin().args([
            "sweep",
            "--scenario",
            "builtin:xi_abb1",
            "--param",
            "bogus_1",
            "--values",
            "1,2",
        ]),
        2,
    );
    let out = run_ok(bin().args([
        "sweep",
        "--scenario",
        "builtin:xi_abb1",
        "--param",
        "gamma_1",
        "--values",
        "5,10",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gamma_1 = 5"));
    let csv = fs::read_to_string(dir.join("sweep_gamma_1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "gamma_1,final_fidelity,t_0.5,t_0.95,t_0.99"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn robustness_zero_epsilon_keeps_distance_zero() {
    let dir = work_dir("rob0");
    let out = run_ok(bin().args([
        "robustness",
        "--scenario",
        "builtin:two_level_abb1",
        "--epsilons",
        "0",
        "--seeds",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("min margin"));
    let csv = fs::read_to_string(dir.join("robustness.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,epsilon,t,distance,bound,margin"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let distance: f64 = fields[3].parse().unwrap();
        assert!(distance.abs() < 1e-10, "{line}");
    }
}

#[test]
fn robustness_is_deterministic_per_seed() {
    let dir_a = work_dir("roba");
    let dir_b = work_dir("robb");
    for dir in [&dir_a, &dir_b] {
        run_ok(bin().env("QLYAP_WORKERS", "2").args([
            "robustness",
            "--scenario",
            "builtin:two_level_abb1",
            "--epsilons",
            "0.01",
            "--seeds",
            "3",
            "--seed",
            "11",
            "--out",
            dir.to_str().unwrap(),
        ]));
    }
    let a = fs::read(dir_a.join("robustness.csv")).unwrap();
    let b = fs::read(dir_b.join("robustness.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn analyze_checks_schema_and_reports_membership() {
    let dir = work_dir("analyze");
    run_ok(bin().args([
        "simulate",
        "--scenario",
        "builtin:two_level_switching",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let traj = dir.join("two_level_switching_trajectory.csv");
    let out = run_ok(bin().args([
        "analyze",
        "--trajectory",
        traj.to_str().unwrap(),
        "--scenario",
        "builtin:two_level_switching",
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("in set         : true"), "{text}");
    assert!(text.contains("two-level set: {|1><1|, |2><2|}"), "{text}");
    assert!(text.contains("[zero point]"), "{text}");

    // foreign CSV headers are rejected up front
    let bogus = dir.join("bogus.csv");
    fs::write(&bogus, "time,value\n1,2\n").unwrap();
    run_code(
        bin().args([
            "analyze",
            "--trajectory",
            bogus.to_str().unwrap(),
            "--scenario",
            "builtin:two_level_switching",
        ]),
        2,
    );
}

#[test]
fn svg_charts_are_emitted_on_request() {
    let dir = work_dir("svg");
    run_ok(bin().args([
        "simulate",
        "--scenario",
        "builtin:two_level_abb1",
        "--out",
        dir.to_str().unwrap(),
        "--svg",
    ]));
    for name in ["two_level_abb1_fidelity.svg", "two_level_abb1_controls.svg"] {
        let svg = fs::read_to_string(dir.join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name}");
        assert!(svg.contains("polyline"), "{name}");
    }
}

#[test]
fn inline_scenario_with_zero_overlap_gets_an_excitation_kick() {
    let dir = work_dir("inline");
    let path = dir.join("inline.json");
    fs::write(
        &path,
        r#"{
  "schema_version": 1,
  "name": "inline_ground_start",
  "system": {
    "h0_diag": [0.4, 0.0],
    "controls": [{"h": [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]], "s_max": 0.2}]
  },
  "target": 1,
  "initial": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
  "controller": {"family": "standard", "gains": [0.4]},
  "sim": {"horizon": 100.0}
}"#,
    )
    .unwrap();
    let out = run_ok(bin().args([
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("excitation   : sinusoidal kick"), "{text}");
    let final_fid: f64 = text
        .lines()
        .find(|l| l.starts_with("final fidelity"))
        .and_then(|l| l.rsplit(':').next())
        .and_then(|v| v.trim().parse().ok())
        .unwrap();
    assert!(final_fid > 0.99, "fidelity {final_fid}");
}

#[test]
fn scenario_documents_round_trip() {
    for (name, text) in BUILTIN_SCENARIOS {
        let doc: ScenarioDoc = serde_json::from_str(text).unwrap();
        let serialized = serde_json::to_string_pretty(&doc).unwrap();
        let reparsed: ScenarioDoc = serde_json::from_str(&serialized).unwrap();
        assert_eq!(doc, reparsed, "round trip failed for {name}");
        // and the normalized scenario still builds
        Scenario::from_doc(reparsed).unwrap();
    }
}

#[test]
fn trajectory_csv_round_trips_numerically() {
    let dir = work_dir("roundtrip");
    run_ok(bin().args([
        "simulate",
        "--scenario",
        "builtin:two_level_abb1",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let path: &Path = &dir.join("two_level_abb1_trajectory.csv");
    let text = fs::read_to_string(path).unwrap();
    let parsed = qlyap_cli::csvio::parse_trajectory_csv(&text).unwrap();
    assert_eq!(parsed.channels, 1);
    assert!(parsed.rows.len() > 100);
    // times strictly increasing, fidelities in range
    for w in parsed.rows.windows(2) {
        assert!(w[1].t > w[0].t);
    }
    assert!(parsed
        .rows
        .iter()
        .all(|r| (0.0..=1.0 + 1e-12).contains(&r.fidelity)));
}

#[test]
fn scenario_output_block_supplies_defaults() {
    let dir = work_dir("outblock");
    let target_dir = dir.join("from-scenario");
    let path = dir.join("with_output.json");
    fs::write(
        &path,
        format!(
            r#"{{
  "schema_version": 1,
  "name": "with_output",
  "system": {{"builtin": "two_level"}},
  "controller": {{"family": "abb1", "strengths": [0.2], "gamma": [11.0]}},
  "sim": {{"horizon": 5.0}},
  "output": {{"dir": "{}", "svg": true}}
}}"#,
            target_dir.display()
        ),
    )
    .unwrap();
    run_ok(bin().args(["simulate", "--scenario", path.to_str().unwrap()]));
    assert!(target_dir.join("with_output_trajectory.csv").exists());
    assert!(target_dir.join("with_output_fidelity.svg").exists());
}

#[test]
fn scenario_perturbation_block_seeds_robustness_defaults() {
    let dir = work_dir("pertblock");
    let path = dir.join("with_pert.json");
    fs::write(
        &path,
        r#"{
  "schema_version": 1,
  "name": "with_pert",
  "system": {"builtin": "two_level"},
  "controller": {"family": "abb1", "strengths": [0.2], "gamma": [11.0]},
  "sim": {"horizon": 5.0},
  "perturbation": {"epsilon": 0.02, "seed": 9}
}"#,
    )
    .unwrap();
    let out = run_ok(bin().args([
        "robustness",
        "--scenario",
        path.to_str().unwrap(),
        "--seeds",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("eps = 0.02"), "{text}");
    assert!(text.contains("seed = 9"), "{text}");
    assert!(text.contains("seed = 10"), "{text}");
}
