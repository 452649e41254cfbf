//! `sbfp`: simulate the shifted Brownian fluctuation process, solve for
//! the optimal turning-point moment, solve the 2x2 decision game, fit
//! parameters from CSV series and run the end-to-end decision pipeline.
//!
//! Exit codes: 0 success; 1 domain findings (infeasible drift, no root,
//! all replications truncated: the JSON report is still written);
//! 2 usage or IO errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sbfp_cli::fit::fit_params;
use sbfp_cli::mc::mc_estimate_parallel;
use sbfp_cli::reconcile::{lst_from_process, reconcile, ReconcileConfig};
use sbfp_cli::report::{predict, PredictConfig, Stage};
use sbfp_cli::series::{load_csv, TimeUnit};

use sbfp_core::game::{payoff_from_analytics, solve_mixed, Game2x2};
use sbfp_core::hstar::{feasibility, solve_direct, solve_paper, uva_constants, HstarProblem};
use sbfp_core::process::{
    DriftExtension, DriftSchedule, InitialDelay, Interarrival, ObservationModel, PhiWeights,
    ProcessParams, Shape, ThresholdMode, DEFAULT_MAX_STEPS,
};
use sbfp_core::transform::{d_du_psi_rational, invert_rational, LstParams};

#[derive(Parser)]
#[command(
    name = "sbfp",
    version,
    about = "Shifted Brownian fluctuation toolkit: simulation, turning-point analytics and the decision game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimates of the turning-point quantities.
    Simulate(SimulateArgs),
    /// Solve for the optimal turning-point moment.
    Hstar(HstarArgs),
    /// Solve a 2x2 Hold/Action vs Up/Down game.
    Game(GameArgs),
    /// Estimate process parameters from a CSV series.
    Fit(FitArgs),
    /// Full pipeline: fit, turning point, moments, game, report.
    Predict(PredictArgs),
    /// Compare the analytic functional against simulated candidate events.
    Reconcile(ReconcileArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Concave,
    Convex,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    /// Turning point = sign change of increments.
    Zero,
    /// Compare increments against the drift schedule values.
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriftExtArg {
    Hold,
    Cycle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Direct,
    Both,
}

#[derive(Args)]
struct ProcessArgs {
    /// Volatility (value per sqrt(unit time)).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Initial position.
    #[arg(long, default_value_t = 0.0)]
    a0: f64,
    /// Per-step drift slopes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.0", allow_hyphen_values = true)]
    drift: Vec<f64>,
    /// Rule for steps beyond the schedule.
    #[arg(long, value_enum, default_value_t = DriftExtArg::Hold)]
    drift_ext: DriftExtArg,
    /// Mean of exponential interarrival times.
    #[arg(long, conflicts_with = "deterministic")]
    delta_mean: Option<f64>,
    /// Fixed interarrival step instead of exponential gaps.
    #[arg(long)]
    deterministic: Option<f64>,
    /// Mean of the exponential initial delay (omit for zero delay).
    #[arg(long)]
    delta0_mean: Option<f64>,
    #[arg(long, value_enum, default_value_t = ShapeArg::Concave)]
    shape: ShapeArg,
    #[arg(long, value_enum, default_value_t = ThresholdArg::Zero)]
    threshold: ThresholdArg,
}

impl ProcessArgs {
    fn build(&self) -> Result<(ProcessParams, ObservationModel), CliError> {
        let drift = DriftSchedule::new(
            self.drift.clone(),
            match self.drift_ext {
                DriftExtArg::Hold => DriftExtension::HoldLast,
                DriftExtArg::Cycle => DriftExtension::Cycle,
            },
        )
        .map_err(|e| CliError::usage(format!("--drift: {e}")))?;
        let params = ProcessParams::new(
            self.sigma,
            self.a0,
            drift,
            match self.shape {
                ShapeArg::Concave => Shape::Concave,
                ShapeArg::Convex => Shape::Convex,
            },
            match self.threshold {
                ThresholdArg::Zero => ThresholdMode::ZeroSign,
                ThresholdArg::Paper => ThresholdMode::PaperLiteral,
            },
        )
        .map_err(|e| CliError::usage(format!("{e}")))?;
        let interarrival = match (self.delta_mean, self.deterministic) {
            (Some(mean), None) => Interarrival::Exponential { mean },
            (None, Some(step)) => Interarrival::Deterministic { step },
            (None, None) => Interarrival::Exponential { mean: 1.0 },
            (Some(_), Some(_)) => unreachable!("clap conflict"),
        };
        let initial_delay = match self.delta0_mean {
            Some(mean) => InitialDelay::Exponential { mean },
            None => InitialDelay::Zero,
        };
        let obs = ObservationModel::new(interarrival, initial_delay)
            .map_err(|e| CliError::usage(format!("{e}")))?;
        Ok((params, obs))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Replication count.
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    /// Transform weight of the pre-exit position.
    #[arg(long, default_value_t = 0.0)]
    u: f64,
    /// Transform weight of the exit position.
    #[arg(long, default_value_t = 0.0)]
    v: f64,
    /// Transform weight of the pre-exit time.
    #[arg(long, default_value_t = 0.0)]
    theta_prev: f64,
    /// Transform weight of the exit time.
    #[arg(long, default_value_t = 0.0)]
    theta_exit: f64,
    /// Write the JSON output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HstarArgs {
    #[arg(long)]
    delta_mean: f64,
    #[arg(long, allow_hyphen_values = true)]
    w_bar: f64,
    #[arg(long, allow_hyphen_values = true)]
    w_prev: f64,
    /// Initial position (direct mode only).
    #[arg(long, default_value_t = 0.0)]
    a0: f64,
    /// Initial-delay mean (direct mode only; defaults to --delta-mean).
    #[arg(long)]
    delta0_mean: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Additionally write a CSV of (h, m_h, g_h) for external plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GameArgs {
    /// JSON file with row_labels, col_labels, payoff1, payoff2.
    #[arg(long, conflicts_with_all = ["a_prev", "a_exit", "mean_step", "cost"])]
    payoff: Option<PathBuf>,
    /// Expected pre-exit position (payoff builder).
    #[arg(long, allow_hyphen_values = true)]
    a_prev: Option<f64>,
    /// Expected exit position (payoff builder).
    #[arg(long, allow_hyphen_values = true)]
    a_exit: Option<f64>,
    /// Expected one-step gain while holding (payoff builder).
    #[arg(long, allow_hyphen_values = true)]
    mean_step: Option<f64>,
    /// Transaction cost of acting (payoff builder).
    #[arg(long)]
    cost: Option<f64>,
    /// Give the uncontrollable side the negated payoff matrix.
    #[arg(long, default_value_t = false)]
    zero_sum: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Increments per drift window.
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, value_enum, default_value_t = TimeUnit::Sec)]
    time_unit: TimeUnit,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, value_enum, default_value_t = TimeUnit::Sec)]
    time_unit: TimeUnit,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Transaction cost in the payoff builder.
    #[arg(long, default_value_t = 0.0)]
    cost: f64,
    #[arg(long, default_value_t = false)]
    zero_sum: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconcileArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Override the mean drift handed to the analytic side.
    #[arg(long, allow_hyphen_values = true)]
    w_bar: Option<f64>,
    /// Override the pre-exit drift handed to the analytic side.
    #[arg(long, allow_hyphen_values = true)]
    w_prev: Option<f64>,
    /// Transform-weight grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.5,1.0,2.0")]
    u_grid: Vec<f64>,
    /// Horizon grid in multiples of the mean interarrival, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,2.0,5.0")]
    h_grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: String) -> Self {
        Self { message, code: 2 }
    }

    fn io(message: String) -> Self {
        Self { message, code: 2 }
    }
}

/// Outcome of a subcommand: the JSON payload plus the exit classification.
struct Output {
    json: String,
    domain_findings: bool,
    out: Option<PathBuf>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_output(output: &Output) -> Result<(), CliError> {
    match &output.out {
        Some(path) => fs::write(path, output.json.as_bytes())
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(output.json.as_bytes())
                .map_err(|e| CliError::io(format!("cannot write stdout: {e}")))
        }
    }
}

/// Fixed 17-significant-digit plot rows (h, m_h, g_h).
fn write_plot_data(
    path: &Path,
    problem: &HstarProblem,
    lst: &LstParams,
) -> Result<(), CliError> {
    let mut rows = String::from("h,m_h,g_h\n");
    let m = invert_rational(&d_du_psi_rational(lst)).ok();
    let uva = uva_constants(problem).ok();
    let hi = 20.0 * problem.delta_mean;
    for i in 1..=512 {
        let h = hi * i as f64 / 512.0;
        let m_h = m.as_ref().map_or(f64::NAN, |terms| terms.eval(h));
        let g_h = uva
            .as_ref()
            .map_or(f64::NAN, |c| sbfp_core::hstar::paper_residual(c, problem.delta_mean, h));
        rows.push_str(&format!("{h:.16e},{m_h:.16e},{g_h:.16e}\n"));
    }
    fs::write(path, rows)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------

fn run_simulate(args: &SimulateArgs) -> Result<Output, CliError> {
    let (params, obs) = args.process.build()?;
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1".into()));
    }
    if args.max_steps == 0 {
        return Err(CliError::usage("--max-steps must be at least 1".into()));
    }
    let weights = PhiWeights {
        u: args.u,
        v: args.v,
        vartheta: args.theta_prev,
        theta: args.theta_exit,
    };
    #[derive(Serialize)]
    struct SimulateOutput {
        params: ProcessParams,
        observation: ObservationModel,
        weights: PhiWeights,
        mc: Stage<sbfp_core::process::McSummary>,
    }
    let result = mc_estimate_parallel(&params, &obs, &weights, args.reps, args.seed, args.max_steps);
    let (mc, findings) = match result {
        Ok(summary) => (Stage::Ok { value: summary }, false),
        Err(e) => (Stage::Failed { reason: e.to_string() }, true),
    };
    Ok(Output {
        json: to_json(&SimulateOutput { params, observation: obs, weights, mc }),
        domain_findings: findings,
        out: args.out.clone(),
    })
}

fn run_hstar(args: &HstarArgs) -> Result<Output, CliError> {
    let problem = HstarProblem {
        delta_mean: args.delta_mean,
        w_bar: args.w_bar,
        w_prev: args.w_prev,
        a0: args.a0,
        delta0_mean: args.delta0_mean.unwrap_or(args.delta_mean),
    };
    if !(problem.delta_mean > 0.0) || !problem.delta_mean.is_finite() {
        return Err(CliError::usage("--delta-mean must be positive and finite".into()));
    }
    if !(problem.delta0_mean >= 0.0) || !problem.delta0_mean.is_finite() {
        return Err(CliError::usage("--delta0-mean must be nonnegative and finite".into()));
    }
    if !problem.w_bar.is_finite() || !problem.w_prev.is_finite() || !problem.a0.is_finite() {
        return Err(CliError::usage("drift and position inputs must be finite".into()));
    }
    if !(args.tol > 0.0) {
        return Err(CliError::usage("--tol must be positive".into()));
    }
    let lst = problem.lst_params();
    let feas = feasibility(&problem);

    #[derive(Serialize)]
    struct HstarOutput {
        problem: HstarProblem,
        feasibility: sbfp_core::hstar::FeasibilityCheck,
        constants: Stage<sbfp_core::hstar::UvaConstants>,
        paper: Stage<sbfp_core::hstar::HstarResult>,
        direct: Stage<sbfp_core::hstar::HstarResult>,
    }
    let constants = match uva_constants(&problem) {
        Ok(c) => Stage::Ok { value: c },
        Err(e) => Stage::Failed { reason: e.to_string() },
    };
    let run_paper = matches!(args.mode, ModeArg::Paper | ModeArg::Both);
    let run_direct = matches!(args.mode, ModeArg::Direct | ModeArg::Both);
    let paper = if run_paper {
        match solve_paper(&problem, args.tol) {
            Ok(r) => Stage::Ok { value: r },
            Err(e) => Stage::Failed { reason: e.to_string() },
        }
    } else {
        Stage::Skipped { reason: "mode not requested".into() }
    };
    let direct = if run_direct {
        match solve_direct(&problem, &lst, args.tol) {
            Ok(r) => Stage::Ok { value: r },
            Err(e) => Stage::Failed { reason: e.to_string() },
        }
    } else {
        Stage::Skipped { reason: "mode not requested".into() }
    };

    if let Some(path) = &args.plot_data {
        write_plot_data(path, &problem, &lst)?;
    }

    let domain_findings = (run_paper && !paper.is_ok()) || (run_direct && !direct.is_ok());
    Ok(Output {
        json: to_json(&HstarOutput { problem, feasibility: feas, constants, paper, direct }),
        domain_findings,
        out: args.out.clone(),
    })
}

fn run_game(args: &GameArgs) -> Result<Output, CliError> {
    let game: Game2x2 = match &args.payoff {
        Some(path) => {
            let raw = fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
            let mut g: Game2x2 = serde_json::from_str(&raw)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            if !g.is_finite() {
                return Err(CliError::usage("payoff entries must be finite".into()));
            }
            if args.zero_sum {
                g = Game2x2::zero_sum(g.payoff1);
            }
            g
        }
        None => {
            let missing = |flag: &str| CliError::usage(format!("--{flag} is required without --payoff"));
            let a_prev = args.a_prev.ok_or_else(|| missing("a-prev"))?;
            let a_exit = args.a_exit.ok_or_else(|| missing("a-exit"))?;
            let mean_step = args.mean_step.ok_or_else(|| missing("mean-step"))?;
            let cost = args.cost.ok_or_else(|| missing("cost"))?;
            let mut g = payoff_from_analytics(a_prev, a_exit, mean_step, cost);
            if args.zero_sum {
                g = Game2x2::zero_sum(g.payoff1);
            }
            g
        }
    };
    #[derive(Serialize)]
    struct GameOutput {
        game: Game2x2,
        equilibrium: sbfp_core::game::MixedEquilibrium,
    }
    let equilibrium = solve_mixed(&game);
    Ok(Output {
        json: to_json(&GameOutput { game, equilibrium }),
        domain_findings: false,
        out: args.out.clone(),
    })
}

fn run_fit(args: &FitArgs) -> Result<Output, CliError> {
    let series = load_csv(&args.csv).map_err(|e| CliError::io(format!("{}: {e}", args.csv.display())))?;
    match fit_params(&series, args.window, args.time_unit) {
        Ok(fit) => Ok(Output { json: to_json(&fit), domain_findings: false, out: args.out.clone() }),
        Err(e) => {
            #[derive(Serialize)]
            struct FitFailure {
                status: &'static str,
                reason: String,
            }
            Ok(Output {
                json: to_json(&FitFailure { status: "failed", reason: e.to_string() }),
                domain_findings: true,
                out: args.out.clone(),
            })
        }
    }
}

fn run_predict(args: &PredictArgs) -> Result<Output, CliError> {
    let series = load_csv(&args.csv).map_err(|e| CliError::io(format!("{}: {e}", args.csv.display())))?;
    if !(args.tol > 0.0) {
        return Err(CliError::usage("--tol must be positive".into()));
    }
    if !(args.cost >= 0.0) || !args.cost.is_finite() {
        return Err(CliError::usage("--cost must be nonnegative and finite".into()));
    }
    let config = PredictConfig {
        window: args.window,
        time_unit: args.time_unit,
        tol: args.tol,
        cost: args.cost,
        zero_sum: args.zero_sum,
    };
    let report = match predict(&series, &config, args.seed) {
        Ok(r) => r,
        Err(e) => {
            #[derive(Serialize)]
            struct PredictFailure {
                status: &'static str,
                reason: String,
            }
            return Ok(Output {
                json: to_json(&PredictFailure { status: "failed", reason: e.to_string() }),
                domain_findings: true,
                out: args.out.clone(),
            });
        }
    };
    if let Some(path) = &args.plot_data {
        let problem = HstarProblem {
            delta_mean: report.fit.delta_hat,
            w_bar: report.fit.w_bar_hat,
            w_prev: report.fit.w_prev_hat,
            a0: report.fit.a0,
            delta0_mean: report.fit.delta_hat,
        };
        write_plot_data(path, &problem, &problem.lst_params())?;
    }
    let domain_findings = report.has_domain_findings();
    Ok(Output { json: to_json(&report), domain_findings, out: args.out.clone() })
}

fn run_reconcile(args: &ReconcileArgs) -> Result<Output, CliError> {
    let (params, obs) = args.process.build()?;
    let mut lst = lst_from_process(&params, &obs)
        .map_err(|e| CliError::usage(format!("{e}")))?;
    if let Some(w_bar) = args.w_bar {
        lst.w_bar = w_bar;
    }
    if let Some(w_prev) = args.w_prev {
        lst.w_prev = w_prev;
    }
    if args.reps < 2 {
        return Err(CliError::usage("--reps must be at least 2".into()));
    }
    if args.max_steps == 0 {
        return Err(CliError::usage("--max-steps must be at least 1".into()));
    }
    if args.u_grid.is_empty() || args.h_grid.is_empty() {
        return Err(CliError::usage("grids must be non-empty".into()));
    }
    let config = ReconcileConfig {
        u_grid: args.u_grid.clone(),
        h_grid: args.h_grid.clone(),
        reps: args.reps,
        seed: args.seed,
        max_steps: args.max_steps,
    };
    match reconcile(&params, &obs, &lst, &config) {
        Ok(report) => {
            let findings = !(report.limit_near_zero.pass && report.limit_far.pass);
            Ok(Output { json: to_json(&report), domain_findings: findings, out: args.out.clone() })
        }
        Err(e) => Err(CliError::usage(format!("{e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Hstar(args) => run_hstar(args),
        Command::Game(args) => run_game(args),
        Command::Fit(args) => run_fit(args),
        Command::Predict(args) => run_predict(args),
        Command::Reconcile(args) => run_reconcile(args),
    };
    match result {
        Ok(output) => {
            if let Err(e) = write_output(&output) {
                eprintln!("sbfp: {}", e.message);
                return ExitCode::from(e.code);
            }
            if output.domain_findings {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("sbfp: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
