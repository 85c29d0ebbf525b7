//! Command-line front end: `validate`, `solve-local`, `run`, `compare` and
//! `multistart`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::baseline::{run_greedy_baseline, BaselineError, BaselineOptions};
use crate::coordinator::{
    multistart_initial_angles, run_bilevel, run_multistart, BilevelOptions, BilevelResult, BoundaryAngles, CoordinatorError,
    CycleRecord,
};
use crate::draining::{replay_solution, solve_draining, verify_solution, DrainingError, DrainingOptions, DrainingProblem, VerifyOptions};
use crate::io::{load_scenario, write_cpu_times_csv, write_history_csv, write_trajectory_csv, LoadError};
use crate::model::Scenario;

#[derive(Debug, Parser)]
#[command(name = "pmcycle", version, about = "Minimum-time periodic monitoring cycles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file.
    Validate {
        scenario: PathBuf,
    },
    /// Solve one visit's draining problem.
    SolveLocal(SolveLocalArgs),
    /// Optimize the boundary angles of the periodic cycle.
    Run(RunConfig),
    /// Run the greedy policy and the optimizer and compare periods.
    Compare(RunConfig),
    /// Optimize from many random initial angle vectors.
    Multistart {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

/// Options shared by the cycle commands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 0.1)]
    pub decay: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_grad: f64,
    #[arg(long = "tol-R", default_value_t = 1e-4)]
    pub tol_r: f64,
    #[arg(long, default_value_t = 200)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include arrival-uncertainty sensitivities in the gradient.
    #[arg(long)]
    pub coupling: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn bilevel_options(&self) -> BilevelOptions {
        BilevelOptions {
            alpha0: self.alpha0,
            decay: self.decay,
            tol_grad: self.tol_grad,
            tol_uncertainty: self.tol_r,
            max_cycles: self.max_cycles,
            include_uncertainty_coupling: self.coupling,
            nodes: self.nodes,
            dt: self.dt,
            draining: DrainingOptions::default(),
        }
    }

    pub fn baseline_options(&self) -> BaselineOptions {
        BaselineOptions {
            dt: self.dt,
            max_cycles: self.max_cycles,
            tol_uncertainty: self.tol_r,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveLocalArgs {
    pub scenario: PathBuf,
    /// Id of the visited target.
    #[arg(long)]
    pub target: u32,
    /// Entrance angle on the sensing circle.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: f64,
    /// Departure angle on the inner circle.
    #[arg(long, allow_hyphen_values = true)]
    pub psi: f64,
    /// Arrival uncertainty.
    #[arg(long)]
    pub arrival: f64,
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Load(_) | CliError::Input(_) => 2,
            CliError::Solver(_) | CliError::Output(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl From<CoordinatorError> for CliError {
    fn from(e: CoordinatorError) -> Self {
        match e {
            CoordinatorError::InvalidOptions(_) | CoordinatorError::InvalidAngles { .. } | CoordinatorError::TooFewVisits(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Parses `args` and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::SolveLocal(args) => cmd_solve_local(args),
        Command::Run(config) => cmd_run(config),
        Command::Compare(config) => cmd_compare(config),
        Command::Multistart { config, count } => cmd_multistart(config, *count),
    }
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> io::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::other)?;
    writeln!(w)?;
    w.flush()
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Input(format!("--{name} must be positive, got {v}")))
    }
}

pub fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let sc = load_scenario(path)?;
    println!(
        "valid: {} targets, {} visits per cycle",
        sc.num_targets(),
        sc.num_visits()
    );
    Ok(())
}

#[derive(Serialize)]
struct LocalReport<'a> {
    problem: &'a DrainingProblem,
    total_time: f64,
    inner_exit_time: f64,
    solution: &'a crate::draining::DrainingSolution,
    verification: &'a crate::draining::VerificationReport,
}

pub fn cmd_solve_local(args: &SolveLocalArgs) -> Result<(), CliError> {
    let sc = load_scenario(&args.scenario)?;
    check_positive("dt", args.dt)?;
    let index = sc
        .index_of_id(args.target)
        .ok_or_else(|| CliError::Input(format!("unknown target id {}", args.target)))?;
    let problem = DrainingProblem::from_angles(sc.target(index).clone(), args.phi, args.psi, args.arrival, args.nodes)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let solution = solve_draining(&problem, None, &DrainingOptions::default()).map_err(|e| match e {
        DrainingError::InvalidProblem(m) | DrainingError::Precondition(m) => CliError::Input(m),
        other => CliError::Solver(other.to_string()),
    })?;
    let verification = verify_solution(&solution, &problem, &VerifyOptions { dt: args.dt, ..VerifyOptions::for_problem(&problem) });
    println!("T* = {:.9}", solution.total_time);
    println!("t0 = {:.9}", solution.inner_exit_time);
    println!(
        "lambda_phi = ({:.6}, {:.6})  lambda_psi = ({:.6}, {:.6})  lambda_R = {:.6}",
        solution.lambda_phi.x, solution.lambda_phi.y, solution.lambda_psi.x, solution.lambda_psi.y, solution.lambda_r
    );
    for c in &verification.checks {
        println!("check {}: {} ({})", c.name, if c.passed { "ok" } else { "FAILED" }, c.detail);
    }
    write_json(
        &args.out,
        "solution.json",
        &LocalReport {
            problem: &problem,
            total_time: solution.total_time,
            inner_exit_time: solution.inner_exit_time,
            solution: &solution,
            verification: &verification,
        },
    )?;
    let samples = replay_solution(&solution, &problem, args.dt);
    write_trajectory_csv(create(&args.out, "trajectory.csv")?, &samples, 1)?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    converged: bool,
    cycles: usize,
    period: f64,
    angles: &'a BoundaryAngles,
    final_cycle: &'a CycleRecord,
}

fn bilevel(sc: &Scenario, config: &RunConfig) -> Result<BilevelResult, CliError> {
    check_positive("dt", config.dt)?;
    Ok(run_bilevel(sc, &config.bilevel_options(), None)?)
}

fn export_bilevel(sc: &Scenario, config: &RunConfig, res: &BilevelResult, prefix: &str) -> Result<(), CliError> {
    let sim = res.last.simulate(sc, config.dt).map_err(|e| CliError::Solver(e.to_string()))?;
    write_trajectory_csv(create(&config.out, &format!("{prefix}trajectory.csv"))?, &sim.samples, sc.num_targets())?;
    write_history_csv(create(&config.out, &format!("{prefix}history.csv"))?, &res.history)?;
    write_cpu_times_csv(create(&config.out, &format!("{prefix}cpu_times.csv"))?, &res.history)?;
    Ok(())
}

pub fn cmd_run(config: &RunConfig) -> Result<(), CliError> {
    let sc = load_scenario(&config.scenario)?;
    let res = bilevel(&sc, config)?;
    export_bilevel(&sc, config, &res, "")?;
    write_json(
        &config.out,
        "result.json",
        &RunSummary {
            converged: res.converged,
            cycles: res.cycles(),
            period: res.period(),
            angles: &res.angles,
            final_cycle: res.record(),
        },
    )?;
    println!("period {:.6} after {} cycles (converged: {})", res.period(), res.cycles(), res.converged);
    if !res.converged {
        return Err(CliError::NotConverged(format!("no convergence within {} cycles", config.max_cycles)));
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareSummary {
    greedy_period: f64,
    greedy_cycles: usize,
    greedy_stabilized: bool,
    optimized_period: f64,
    optimized_cycles: usize,
    optimized_converged: bool,
    improvement_percent: f64,
    greedy_at_least_optimized: bool,
}

pub fn cmd_compare(config: &RunConfig) -> Result<(), CliError> {
    let sc = load_scenario(&config.scenario)?;
    check_positive("dt", config.dt)?;
    config.bilevel_options().validate()?;
    let greedy = run_greedy_baseline(&sc, &config.baseline_options())?;
    write_trajectory_csv(create(&config.out, "greedy_trajectory.csv")?, &greedy.trajectory, sc.num_targets())?;
    write_history_csv(create(&config.out, "greedy_history.csv")?, &greedy.history)?;
    let res = bilevel(&sc, config)?;
    export_bilevel(&sc, config, &res, "bilevel_")?;
    let summary = CompareSummary {
        greedy_period: greedy.period,
        greedy_cycles: greedy.history.len(),
        greedy_stabilized: greedy.converged,
        optimized_period: res.period(),
        optimized_cycles: res.cycles(),
        optimized_converged: res.converged,
        improvement_percent: 100.0 * (greedy.period - res.period()) / greedy.period,
        greedy_at_least_optimized: greedy.period >= res.period(),
    };
    write_json(&config.out, "summary.json", &summary)?;
    println!(
        "greedy {:.6} ({} cycles), optimized {:.6} ({} cycles), improvement {:.2}%",
        summary.greedy_period, summary.greedy_cycles, summary.optimized_period, summary.optimized_cycles, summary.improvement_percent
    );
    if !greedy.converged || !res.converged {
        return Err(CliError::NotConverged("greedy or optimized cycle did not settle".to_string()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MultistartEntry {
    index: usize,
    converged: bool,
    final_period: Option<f64>,
    cycles: usize,
    initial: BoundaryAngles,
    final_angles: Option<BoundaryAngles>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct MultistartSummary {
    count: usize,
    seed: u64,
    failures: usize,
    min_period: f64,
    median_period: f64,
    max_period: f64,
    /// `(max - min) / median`.
    spread: f64,
    runs: Vec<MultistartEntry>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn cmd_multistart(config: &RunConfig, count: usize) -> Result<(), CliError> {
    let sc = load_scenario(&config.scenario)?;
    check_positive("dt", config.dt)?;
    let options = config.bilevel_options();
    options.validate()?;
    if sc.num_visits() < 2 {
        return Err(CoordinatorError::TooFewVisits(sc.num_visits()).into());
    }
    let starts = multistart_initial_angles(sc.num_visits(), count, config.seed);
    let outcomes = run_multistart(&sc, &options, count, config.seed);
    let mut periods = create(&config.out, "multistart_periods.csv")?;
    writeln!(periods, "run,cycle,T")?;
    let mut runs = Vec::with_capacity(count);
    for ((index, outcome), initial) in outcomes.into_iter().zip(starts) {
        match outcome {
            Ok(run) => {
                for (c, t) in run.periods.iter().enumerate() {
                    writeln!(periods, "{},{},{}", index, c, crate::io::format_sig(*t))?;
                }
                runs.push(MultistartEntry {
                    index,
                    converged: run.converged,
                    final_period: Some(run.final_period()),
                    cycles: run.periods.len(),
                    initial,
                    final_angles: Some(run.final_angles),
                    error: None,
                });
            }
            Err(e) => runs.push(MultistartEntry {
                index,
                converged: false,
                final_period: None,
                cycles: 0,
                initial,
                final_angles: None,
                error: Some(e),
            }),
        }
    }
    periods.flush()?;
    let mut finals: Vec<f64> = runs.iter().filter_map(|r| r.final_period).collect();
    finals.sort_by(f64::total_cmp);
    let med = median(&finals);
    let summary = MultistartSummary {
        count,
        seed: config.seed,
        failures: runs.iter().filter(|r| !r.converged).count(),
        min_period: finals.first().copied().unwrap_or(f64::NAN),
        median_period: med,
        max_period: finals.last().copied().unwrap_or(f64::NAN),
        spread: finals.last().zip(finals.first()).map_or(f64::NAN, |(hi, lo)| (hi - lo) / med),
        runs,
    };
    write_json(&config.out, "multistart_summary.json", &summary)?;
    println!(
        "{} runs: min {:.6}, median {:.6}, max {:.6}, spread {:.3}%, {} not converged",
        count,
        summary.min_period,
        summary.median_period,
        summary.max_period,
        100.0 * summary.spread,
        summary.failures
    );
    if summary.failures > 0 {
        return Err(CliError::NotConverged(format!("{} runs did not converge", summary.failures)));
    }
    Ok(())
}
