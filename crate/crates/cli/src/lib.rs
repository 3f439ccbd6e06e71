#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end for the `covchange` tests and simulations.

pub mod input;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use covchange::minimax::{
    boundary_sweep, calibrate_lambda, monte_carlo_errors, BoundaryOptions, PriorSpec, Thresholded,
};
use covchange::multivariate::{scan_adaptive, scan_adaptive_sdp, scan_oracle, ScanOptions};
use covchange::sdp::{RelaxOptions, DEFAULT_TOL};
use covchange::sparse_eig::DEFAULT_BUDGET;
use covchange::univariate::test_univariate;
use covchange::{Procedure, Scanner, Series};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "covchange",
    version,
    about = "Tests for a single change in variance or covariance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Variance-ratio scan on a single column.
    TestUni(TestUniArgs),
    /// Covariance scan (oracle, adaptive or adaptive-sdp).
    TestCov(TestCovArgs),
    /// Null quantile of the maximal standardized statistic.
    Calibrate(CalibrateArgs),
    /// Type I and Type II errors under the least-favourable prior.
    Simulate(SimulateArgs),
    /// 50%-power signal strength of the univariate test over a range of n.
    Boundary(BoundaryArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TestUni(_) => "test-uni",
            Command::TestCov(_) => "test-cov",
            Command::Calibrate(_) => "calibrate",
            Command::Simulate(_) => "simulate",
            Command::Boundary(_) => "boundary",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Uni,
    Oracle,
    Adaptive,
    AdaptiveSdp,
}

#[derive(Args, Debug, Serialize)]
pub struct TestUniArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub lambda: f64,
    /// Subtract column means before testing.
    #[arg(long)]
    pub center: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct Solver {
    /// Relaxation gap tolerance relative to `s ||A||_inf`.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Support-enumeration budget for exact sparse eigenvalues.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
}

impl Solver {
    fn options(&self) -> ScanOptions {
        ScanOptions {
            budget: self.budget,
            relax: RelaxOptions {
                tol: self.tol,
                ..RelaxOptions::default()
            },
        }
    }
}

/// Oracle parameters; required for `oracle`, rejected otherwise.
#[derive(Args, Debug, Serialize)]
pub struct OracleParams {
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "sigma-sq")]
    pub sigma_sq: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct TestCovArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_enum)]
    pub variant: Variant,
    #[command(flatten)]
    #[serde(flatten)]
    pub oracle: OracleParams,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
    #[arg(long)]
    pub center: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Variant,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub oracle: OracleParams,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Variant,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub oracle: OracleParams,
    /// Signal strength of the prior draws.
    #[arg(long)]
    pub rho: f64,
    /// Sparsity of the prior's direction (multivariate variants).
    #[arg(long, default_value_t = 1)]
    pub prior_s: usize,
    #[arg(long, default_value_t = 1.0)]
    pub prior_sigma_sq: f64,
    /// Fixed changepoint instead of the dyadic mixture.
    #[arg(long)]
    pub changepoint: Option<usize>,
    /// Threshold multiplier; calibrated at `--delta` when omitted.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pub n_min: usize,
    #[arg(long, default_value_t = 8192)]
    pub n_max: usize,
    /// Ratio between consecutive sample sizes.
    #[arg(long, default_value_t = 4)]
    pub n_factor: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Replicates per power evaluation and for calibration.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 14)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub target_power: f64,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input file or configuration; exit status 2.
    Usage(String),
    /// The computation failed; exit status 1.
    Runtime(covchange::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<covchange::Error> for CliError {
    fn from(e: covchange::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn error_kind(e: &covchange::Error) -> &'static str {
    use covchange::Error::*;
    match e {
        InvalidInput(_) => "invalid_input",
        Domain(_) => "domain",
        BudgetExceeded { .. } => "budget_exceeded",
        DegenerateData(_) => "degenerate_data",
        Undecidable(_) => "undecidable",
    }
}

fn load(path: &Path, center: bool) -> Result<Series, CliError> {
    let x = input::read_csv(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(if center { x.centered() } else { x })
}

fn check_lambda(lambda: f64) -> Result<(), CliError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(usage("--lambda must be positive and finite"));
    }
    Ok(())
}

fn procedure(variant: Variant, oracle: &OracleParams) -> Result<Procedure, CliError> {
    match (variant, oracle.s, oracle.sigma_sq) {
        (Variant::Oracle, Some(s), Some(sigma_sq)) => {
            if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
                return Err(usage("--sigma-sq must be positive and finite"));
            }
            Ok(Procedure::Oracle { s, sigma_sq })
        }
        (Variant::Oracle, _, _) => Err(usage("the oracle variant requires both --s and --sigma-sq")),
        (_, None, None) => Ok(match variant {
            Variant::Uni => Procedure::Univariate,
            Variant::Adaptive => Procedure::Adaptive,
            _ => Procedure::AdaptiveSdp,
        }),
        _ => Err(usage("--s and --sigma-sq are only accepted by the oracle variant")),
    }
}

fn check_sampling(reps: usize, delta: f64, calibrating: bool) -> Result<(), CliError> {
    if reps < 1 {
        return Err(usage("--reps must be at least 1"));
    }
    if calibrating {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(usage("--delta must lie in (0, 1]"));
        }
        if (reps as f64) * delta < 5.0 {
            return Err(usage(format!(
                "quantile infeasible: reps * delta = {} < 5 null exceedances",
                reps as f64 * delta
            )));
        }
        if reps < 100 {
            return Err(usage(format!("calibration needs --reps >= 100, got {reps}")));
        }
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Validates the configuration, then runs it. Usage errors surface before
/// any computation.
pub fn execute(command: &Command) -> Result<Value, CliError> {
    match command {
        Command::TestUni(a) => {
            check_lambda(a.lambda)?;
            let x = load(&a.input, a.center)?;
            if x.p() != 1 {
                return Err(usage(format!("test-uni needs a single column, found {}", x.p())));
            }
            let r = test_univariate(&x, a.lambda)?;
            let mut v = to_value(&r);
            v["trigger"] = to_value(&r.trigger());
            v["n"] = json!(x.n());
            Ok(v)
        }
        Command::TestCov(a) => {
            check_lambda(a.lambda)?;
            if a.variant == Variant::Uni {
                return Err(usage("test-cov takes --variant oracle, adaptive or adaptive-sdp"));
            }
            let proc = procedure(a.variant, &a.oracle)?;
            let x = load(&a.input, a.center)?;
            let opts = a.solver.options();
            let scan = match proc {
                Procedure::Oracle { s, sigma_sq } => {
                    if s < 1 || s > x.p() {
                        return Err(usage(format!("--s must lie in [1, p = {}]", x.p())));
                    }
                    scan_oracle(&x, s, sigma_sq, &opts)?
                }
                Procedure::Adaptive => scan_adaptive(&x, &opts)?,
                _ => scan_adaptive_sdp(&x, &opts)?,
            };
            let r = scan.report(a.lambda);
            let mut v = to_value(&r);
            v["trigger"] = to_value(&r.trigger());
            v["n"] = json!(x.n());
            v["p"] = json!(x.p());
            Ok(v)
        }
        Command::Calibrate(a) => {
            let proc = procedure(a.variant, &a.oracle)?;
            check_sampling(a.reps, a.delta, true)?;
            check_dims(a.variant, a.n, a.p)?;
            let scanner = Scanner::new(proc).with_options(a.solver.options());
            let c = calibrate_lambda(&scanner, a.n, a.p, a.delta, a.reps, a.seed)?;
            let mut v = to_value(&c);
            v["procedure"] = to_value(&proc);
            Ok(v)
        }
        Command::Simulate(a) => {
            let proc = procedure(a.variant, &a.oracle)?;
            check_sampling(a.reps, a.delta, a.lambda.is_none())?;
            check_dims(a.variant, a.n, a.p)?;
            if let Some(l) = a.lambda {
                check_lambda(l)?;
            }
            let spec = match a.variant {
                Variant::Uni => PriorSpec::uni(a.n, a.prior_sigma_sq, a.rho),
                _ => PriorSpec::multi(a.n, a.p, a.prior_s, a.prior_sigma_sq, a.rho),
            }
            .and_then(|s| match a.changepoint {
                Some(t0) => s.with_changepoint(t0),
                None => Ok(s),
            })
            .map_err(|e| usage(e.to_string()))?;
            let scanner = Scanner::new(proc).with_options(a.solver.options());
            let (lambda, calibration) = match a.lambda {
                Some(l) => (l, Value::Null),
                None => {
                    let c = calibrate_lambda(&scanner, a.n, a.p, a.delta, a.reps, a.seed)?;
                    (c.lambda, to_value(&c))
                }
            };
            let det = Thresholded { scanner, lambda };
            let out = monte_carlo_errors(&det, &spec, a.reps, a.seed)?;
            Ok(json!({
                "outcome": to_value(&out),
                "lambda": lambda,
                "calibration": calibration,
                "prior": to_value(&spec),
                "procedure": to_value(&proc),
            }))
        }
        Command::Boundary(a) => {
            check_sampling(a.reps, a.delta, true)?;
            if a.n_min < 2 || a.n_max < a.n_min || a.n_factor < 2 {
                return Err(usage("need 2 <= --n-min <= --n-max and --n-factor >= 2"));
            }
            if !(a.target_power > 0.0 && a.target_power < 1.0) {
                return Err(usage("--target-power must lie in (0, 1)"));
            }
            let mut ns = Vec::new();
            let mut n = a.n_min;
            while n <= a.n_max {
                ns.push(n);
                n = match n.checked_mul(a.n_factor) {
                    Some(m) => m,
                    None => break,
                };
            }
            let opts = BoundaryOptions {
                target_power: a.target_power,
                reps: a.reps,
                seed: a.seed,
                steps: a.steps,
                ..BoundaryOptions::default()
            };
            let pts = boundary_sweep(&Scanner::new(Procedure::Univariate), &ns, a.delta, a.reps, &opts)?;
            let ratios: Vec<f64> = pts.iter().map(|p| p.ratio).collect();
            let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
            Ok(json!({
                "points": to_value(&pts),
                "max_over_min_ratio": max / min,
            }))
        }
    }
}

fn check_dims(variant: Variant, n: usize, p: usize) -> Result<(), CliError> {
    if n < 2 || p < 1 {
        return Err(usage("need --n >= 2 and --p >= 1"));
    }
    if variant == Variant::Uni && p != 1 {
        return Err(usage("the uni variant needs --p 1"));
    }
    Ok(())
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::Calibrate(a) => Some(a.seed),
        Command::Simulate(a) => Some(a.seed),
        Command::Boundary(a) => Some(a.seed),
        _ => None,
    }
}

fn output_of(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::TestUni(a) => a.output.as_ref(),
        Command::TestCov(a) => a.output.as_ref(),
        Command::Calibrate(a) => a.output.as_ref(),
        Command::Simulate(a) => a.output.as_ref(),
        Command::Boundary(a) => a.output.as_ref(),
    }
}

/// Wraps a result or runtime error with the resolved configuration.
pub fn envelope(command: &Command, body: Result<&Value, &covchange::Error>) -> Value {
    let config = match to_value(command) {
        Value::Object(mut m) => m.remove(command.name()).unwrap_or(Value::Null),
        other => other,
    };
    let mut v = json!({
        "artifact": { "name": "covchange", "version": VERSION },
        "command": command.name(),
        "config": config,
        "seed": seed_of(command),
    });
    match body {
        Ok(r) => v["result"] = r.clone(),
        Err(e) => {
            v["error"] = json!({ "kind": error_kind(e), "message": e.to_string() });
        }
    }
    v
}

fn emit(command: &Command, doc: &Value) -> Result<(), CliError> {
    let text = report::render(doc);
    match output_of(command) {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> u8 {
    let command = &cli.command;
    match execute(command) {
        Ok(result) => match emit(command, &envelope(command, Ok(&result))) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(CliError::Runtime(e)) => {
            let doc = envelope(command, Err(&e));
            eprintln!("error: {e}");
            if let Err(w) = emit(command, &doc) {
                eprintln!("error: {w}");
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
