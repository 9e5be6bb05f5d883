//! `urllc`: command-line front end for the power-allocation library.
//!
//! Data goes to standard output (or `--out`), diagnostics to standard error.
//! Exit codes: 0 success, 1 infeasible problem, 2 usage, input or runtime
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use urllc_core::allocator::{
    AlgorithmRegistry, AllocationResult, AllocationStatus, Conventional, OptimizeOptions,
};
use urllc_core::gp::{self, GpStatus, SolverOptions};
use urllc_core::mc::{empirical_ergodic_rate, McConfig};
use urllc_core::receiver::ReceiverKind;
use urllc_core::scenario::{load_scenario, parse_scenario, Scenario};
use urllc_core::sweep::{run_sweep, SweepAxis, SweepSpec, PAPER_SNAPSHOTS};

const DEFAULT_SCENARIO: &str = include_str!("../../../defaults.json");

#[derive(Parser)]
#[command(name = "urllc", version, about = "Joint pilot/payload power allocation for massive-MIMO URLLC uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (each subcommand has its own default).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Increase log verbosity on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario JSON file; the built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> Result<Scenario, Failure> {
        match &self.scenario {
            Some(p) => load_scenario(p).map_err(|e| Failure::Error(format!("{}: {e}", p.display()))),
            None => Ok(parse_scenario(DEFAULT_SCENARIO)?),
        }
    }
}

#[derive(Args)]
struct LoopArgs {
    /// Relative objective change that stops the successive-GP loop.
    #[arg(long, default_value_t = 1e-4)]
    xi: f64,
}

impl LoopArgs {
    fn options(&self) -> Result<OptimizeOptions, Failure> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Failure::Error(format!("--xi must be positive, got {}", self.xi)));
        }
        Ok(OptimizeOptions { xi: self.xi, ..OptimizeOptions::default() })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print it in normalized form.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// Run one allocation scheme and print the result.
    Allocate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "mrc")]
        receiver: ReceiverKind,
        /// proposed, upper_bound, conventional or fixed_pilot.
        #[arg(long, default_value = "proposed")]
        algorithm: String,
        #[command(flatten)]
        opts: LoopArgs,
    },
    /// Run all schemes on one scenario.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "mrc")]
        receiver: ReceiverKind,
        #[command(flatten)]
        opts: LoopArgs,
    },
    /// Compare closed-form rate bounds with simulated ergodic rates.
    McVerify {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Defaults to the receiver recorded in --allocation, else mrc.
        #[arg(long)]
        receiver: Option<ReceiverKind>,
        /// Allocation JSON written by `allocate`; computed when omitted.
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 5000 trials instead of 2000.
        #[arg(long)]
        paper_scale: bool,
        #[command(flatten)]
        opts: LoopArgs,
    },
    /// Average scheme scores over random drops along one parameter axis.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, default_value = "mrc")]
        receiver: ReceiverKind,
        /// Comma-separated axis values (defaults depend on the axis).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        snapshots: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cell radius in metres.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "proposed,upper_bound,conventional,fixed_pilot")]
        algorithms: Vec<String>,
        /// Also write the per-value summary (means, standard errors) as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// 100 snapshots instead of 20.
        #[arg(long)]
        paper_scale: bool,
        #[command(flatten)]
        opts: LoopArgs,
    },
    /// Solve a geometric program given in text form.
    GpSolve {
        file: PathBuf,
    },
}

enum Failure {
    Infeasible(f64),
    Error(String),
}

impl From<urllc_core::Error> for Failure {
    fn from(e: urllc_core::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

/// Data written, then possibly a non-zero verdict.
struct Output {
    data: String,
    infeasible_phi: Option<f64>,
}

impl Output {
    fn ok(data: String) -> Self {
        Self { data, infeasible_phi: None }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn allocation_csv(r: &AllocationResult) -> String {
    let mut s = String::from("device,p_pilot,p_data,sinr_lb,rate_lb,shannon_rate,scored_rate,violation\n");
    for k in 0..r.violations.len() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{},{},{}",
            r.allocation.p_pilot[k],
            r.allocation.p_data[k],
            r.sinr_lb[k],
            r.rate_lb[k],
            r.shannon_rate[k],
            r.scored_rate[k],
            r.violations[k]
        );
    }
    s
}

fn verdict(r: &AllocationResult) -> Option<f64> {
    (r.status == AllocationStatus::Infeasible).then_some(r.phi)
}

fn run_allocation(
    scenario: &Scenario,
    receiver: ReceiverKind,
    algorithm: &str,
    opts: &OptimizeOptions,
) -> Result<AllocationResult, Failure> {
    let alg = AlgorithmRegistry::standard().get(algorithm)?;
    Ok(alg.allocate(scenario, &*receiver.receiver(), opts)?)
}

fn run(cmd: Command, format: Option<Format>) -> Result<Output, Failure> {
    match cmd {
        Command::Validate { scenario } => {
            let s = scenario.load()?;
            Ok(Output::ok(s.to_json() + "\n"))
        }
        Command::Allocate { scenario, receiver, algorithm, opts } => {
            let s = scenario.load()?;
            let r = run_allocation(&s, receiver, &algorithm, &opts.options()?)?;
            let data = match format.unwrap_or(Format::Json) {
                Format::Json => r.to_json() + "\n",
                Format::Csv => allocation_csv(&r),
            };
            Ok(Output { data, infeasible_phi: verdict(&r) })
        }
        Command::Compare { scenario, receiver, opts } => {
            let s = scenario.load()?;
            let opts = opts.options()?;
            let rx = receiver.receiver();
            let registry = AlgorithmRegistry::standard();
            let ub = registry.get("upper_bound")?.allocate(&s, &*rx, &opts)?;
            let results = vec![
                registry.get("proposed")?.allocate(&s, &*rx, &opts)?,
                Conventional::from_upper_bound(&s, &*rx, ub.clone())?,
                registry.get("fixed_pilot")?.allocate(&s, &*rx, &opts)?,
                ub,
            ];
            let data = match format.unwrap_or(Format::Csv) {
                Format::Json => json(&results),
                Format::Csv => {
                    let mut out = String::from("algorithm,status,phi,weighted_sum,shannon_sum,violations\n");
                    for r in &results {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            r.algorithm,
                            serde_json::to_value(r.status).expect("status serializes").as_str().unwrap_or(""),
                            r.phi,
                            r.weighted_sum,
                            r.shannon_sum,
                            r.violation_count()
                        );
                    }
                    out
                }
            };
            Ok(Output { data, infeasible_phi: verdict(&results[0]) })
        }
        Command::McVerify { scenario, receiver, allocation, trials, seed, paper_scale, opts } => {
            let s = scenario.load()?;
            let (rx, result) = match allocation {
                Some(path) => {
                    let r: AllocationResult = serde_json::from_str(&read(&path)?)
                        .map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
                    (receiver.unwrap_or(r.receiver), r)
                }
                None => {
                    let rx = receiver.unwrap_or(ReceiverKind::Mrc);
                    (rx, run_allocation(&s, rx, "proposed", &opts.options()?)?)
                }
            };
            if let Some(phi) = verdict(&result) {
                return Err(Failure::Infeasible(phi));
            }
            let default_trials = if paper_scale { McConfig::PAPER_TRIALS } else { McConfig::DESK_TRIALS };
            let cfg = McConfig::new(trials.unwrap_or(default_trials), seed, rx)?;
            let report = empirical_ergodic_rate(&s, &result.allocation.p_pilot, &result.allocation.p_data, &cfg)?;
            if report.clamped > 0 || report.redrawn > 0 {
                log::info!("{} negative rates clamped, {} trials redrawn", report.clamped, report.redrawn);
            }
            let data = match format.unwrap_or(Format::Csv) {
                Format::Json => json(&report),
                Format::Csv => report.to_csv(),
            };
            Ok(Output::ok(data))
        }
        Command::Sweep { axis, receiver, values, snapshots, seed, radius, algorithms, summary, paper_scale, opts } => {
            let mut spec = SweepSpec::preset(axis, receiver);
            spec.base_seed = seed;
            if let Some(v) = values {
                spec.values = v;
            }
            if paper_scale {
                spec.snapshots = PAPER_SNAPSHOTS;
            }
            if let Some(n) = snapshots {
                spec.snapshots = n;
            }
            if let Some(r) = radius {
                spec.cell_radius_m = r;
            }
            let algs: Vec<&str> = algorithms.iter().map(String::as_str).collect();
            let res = run_sweep(&spec, &algs, &opts.options()?)?;
            if let Some(path) = summary {
                std::fs::write(&path, res.summary_json() + "\n")
                    .map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
            }
            let data = match format.unwrap_or(Format::Csv) {
                Format::Json => json(&res),
                Format::Csv => res.to_csv(),
            };
            Ok(Output::ok(data))
        }
        Command::GpSolve { file } => {
            let problem = gp::parse_problem(&read(&file)?)?;
            let sol = gp::solve(&problem, None, &SolverOptions::default())?;
            if sol.status == GpStatus::MaxIter {
                log::warn!("solver hit its iteration limit; reporting the last iterate");
            }
            #[derive(Serialize)]
            struct Report<'a> {
                status: GpStatus,
                objective_value: f64,
                values: Vec<(&'a str, f64)>,
                kkt_residual: f64,
                newton_steps: usize,
            }
            let values = problem.names.iter().map(String::as_str).zip(sol.values.iter().copied()).collect();
            let report = Report {
                status: sol.status,
                objective_value: sol.objective_value,
                values,
                kkt_residual: sol.kkt_residual,
                newton_steps: sol.newton_steps,
            };
            let data = match format.unwrap_or(Format::Json) {
                Format::Json => json(&report),
                Format::Csv => {
                    let mut out = String::from("variable,value\n");
                    for (n, v) in &report.values {
                        let _ = writeln!(out, "{n},{v}");
                    }
                    out
                }
            };
            if sol.status == GpStatus::Infeasible {
                eprintln!("infeasible: the constraint set is empty");
                return Ok(Output { data, infeasible_phi: Some(f64::NAN) });
            }
            Ok(Output::ok(data))
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let out = cli.out.clone();
    match run(cli.command, cli.format) {
        Ok(output) => {
            let written = match &out {
                Some(p) => std::fs::write(p, &output.data).map_err(|e| format!("{}: {e}", p.display())),
                None => {
                    print!("{}", output.data);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            match output.infeasible_phi {
                Some(phi) if phi.is_nan() => ExitCode::from(1),
                Some(phi) => {
                    eprintln!("infeasible: phi={phi:.4} < 1");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Infeasible(phi)) => {
            eprintln!("infeasible: phi={phi:.4} < 1");
            ExitCode::from(1)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
