use std::path::PathBuf;
use std::process::ExitCode;

use qlyap_cli::commands::{
    cmd_analyze, cmd_compare, cmd_robustness, cmd_simulate, cmd_sweep, OutputOptions,
};
use qlyap_cli::pool::resolve_workers;
use qlyap_cli::scenario::{Scenario, BUILTIN_SCENARIOS};
use qlyap_cli::CliError;

const USAGE: &str = "\
qlyap - rapid Lyapunov control of finite-dimensional quantum systems

USAGE:
  qlyap simulate   --scenario PATH [--out DIR] [--svg]
  qlyap compare    --scenario PATH [--scenario PATH ...] [--out DIR] [--workers N] [--svg]
  qlyap sweep      --scenario PATH --param NAME --values V1,V2,... [--out DIR] [--workers N]
  qlyap robustness --scenario PATH [--epsilons E1,E2,...] [--seeds N] [--seed BASE] [--out DIR] [--workers N]
  qlyap analyze    --trajectory CSV --scenario PATH

Scenario paths may also name an embedded scenario as builtin:<name>.
Sweep parameters: gamma_k, eta_k, S_k, K_k (one-based channel k), dt.
QLYAP_WORKERS overrides --workers.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
";

struct Args {
    scenarios: Vec<String>,
    out: Option<PathBuf>,
    svg: bool,
    workers: Option<usize>,
    param: Option<String>,
    values: Vec<f64>,
    epsilons: Option<Vec<f64>>,
    seeds: u64,
    seed: Option<u64>,
    trajectory: Option<PathBuf>,
}

fn parse_args(args: &[String]) -> Result<Args, CliError> {
    let mut out = Args {
        scenarios: Vec::new(),
        out: None,
        svg: false,
        workers: None,
        param: None,
        values: Vec::new(),
        epsilons: None,
        seeds: 20,
        seed: None,
        trajectory: None,
    };
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = || {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::validation(format!("flag {flag} needs a value")))
        };
        match flag.as_str() {
            "--scenario" => out.scenarios.push(value()?),
            "--out" => out.out = Some(PathBuf::from(value()?)),
            "--svg" => out.svg = true,
            "--workers" => {
                out.workers = Some(
                    value()?
                        .parse()
                        .map_err(|e| CliError::validation(format!("bad --workers value: {e}")))?,
                )
            }
            "--param" => out.param = Some(value()?),
            "--values" => {
                out.values = parse_f64_list(&value()?)?;
            }
            "--epsilons" => {
                out.epsilons = Some(parse_f64_list(&value()?)?);
            }
            "--seeds" => {
                out.seeds = value()?
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad --seeds value: {e}")))?
            }
            "--seed" => {
                out.seed = Some(
                    value()?
                        .parse()
                        .map_err(|e| CliError::validation(format!("bad --seed value: {e}")))?,
                )
            }
            "--trajectory" => out.trajectory = Some(PathBuf::from(value()?)),
            other => return Err(CliError::validation(format!("unknown flag `{other}`"))),
        }
    }
    Ok(out)
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::validation(format!("bad number `{s}`: {e}")))
        })
        .collect()
}

fn load_single(args: &Args) -> Result<Scenario, CliError> {
    match args.scenarios.as_slice() {
        [one] => Scenario::load(one),
        [] => Err(CliError::validation("missing --scenario".into())),
        _ => Err(CliError::validation(
            "this subcommand takes exactly one --scenario".into(),
        )),
    }
}

/// Flags take precedence over the scenario's `output` block, which in turn
/// overrides the defaults (`out/`, no SVG).
fn resolve_output(args: &Args, scenario: Option<&Scenario>) -> OutputOptions {
    let doc = scenario.and_then(|s| s.doc.output.as_ref());
    let dir = args
        .out
        .clone()
        .or_else(|| doc.and_then(|o| o.dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let svg = args.svg || doc.and_then(|o| o.svg).unwrap_or(false);
    OutputOptions { dir, svg }
}

fn dispatch(subcommand: &str, args: Args) -> Result<(), CliError> {
    let workers = resolve_workers(args.workers);
    match subcommand {
        "simulate" => {
            let scenario = load_single(&args)?;
            let output = resolve_output(&args, Some(&scenario));
            cmd_simulate(&scenario, &output)
        }
        "compare" => {
            if args.scenarios.is_empty() {
                return Err(CliError::validation(
                    "compare needs --scenario entries".into(),
                ));
            }
            let scenarios: Vec<Scenario> = args
                .scenarios
                .iter()
                .map(|s| Scenario::load(s))
                .collect::<Result<_, _>>()?;
            let output = resolve_output(&args, scenarios.first());
            cmd_compare(&scenarios, &output, workers)
        }
        "sweep" => {
            let scenario = load_single(&args)?;
            let param = args
                .param
                .as_deref()
                .ok_or_else(|| CliError::validation("sweep needs --param".into()))?;
            let output = resolve_output(&args, Some(&scenario));
            cmd_sweep(&scenario, param, &args.values, &output, workers)
        }
        "robustness" => {
            let scenario = load_single(&args)?;
            let output = resolve_output(&args, Some(&scenario));
            // flags win; the scenario's perturbation block supplies defaults
            let epsilons = args.epsilons.clone().unwrap_or_else(|| {
                scenario
                    .perturbation
                    .as_ref()
                    .map(|p| vec![p.epsilon])
                    .unwrap_or_else(|| vec![0.001, 0.01, 0.05])
            });
            let base_seed = args
                .seed
                .or_else(|| scenario.perturbation.as_ref().and_then(|p| p.seed))
                .unwrap_or(0);
            cmd_robustness(
                &scenario, &epsilons, args.seeds, base_seed, &output, workers,
            )
        }
        "analyze" => {
            let scenario = load_single(&args)?;
            let trajectory = args
                .trajectory
                .as_deref()
                .ok_or_else(|| CliError::validation("analyze needs --trajectory".into()))?;
            cmd_analyze(trajectory, &scenario)
        }
        other => Err(CliError::validation(format!(
            "unknown subcommand `{other}`"
        ))),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some(subcommand) = argv.first().cloned() else {
        eprint!("{USAGE}");
        eprintln!("\nembedded scenarios:");
        for (name, _) in BUILTIN_SCENARIOS {
            eprintln!("  builtin:{name}");
        }
        return ExitCode::from(2);
    };
    if subcommand == "--help" || subcommand == "-h" || subcommand == "help" {
        print!("{USAGE}");
        println!("\nembedded scenarios:");
        for (name, _) in BUILTIN_SCENARIOS {
            println!("  builtin:{name}");
        }
        return ExitCode::SUCCESS;
    }
    let args = match parse_args(&argv[1..]) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(&subcommand, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
