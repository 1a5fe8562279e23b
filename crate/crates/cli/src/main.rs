//! `rprv` command-line front end.
//!
//! Exit codes: 0 success, 2 infeasible configuration (the region is
//! infinite; output is still written), 3 input error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use rprv::conformal::{min_calibration_size, read_scores, robust_quantile, write_histogram_csv, CalibrationSize};
use rprv::harness::{
    generate_synthetic, ingest_trajectories, run_coverage_experiment, write_report_csvs, write_trajectories,
    write_trajectories_csv, DivergenceKind, EpsilonSetting, ExperimentConfig, HarnessError, Side,
};
use rprv::predictors::{fit_predictor, PredictorKind};
use rprv::rprv::{required_horizon, Method, StateNorm, Verifier, VerifierConfig};
use rprv::shift::{estimate_epsilon, TvGrid};
use rprv::{Formula, PredictionRegion, Trajectory};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "rprv", version, about = "Robust predictive runtime verification of STL specifications")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a lower bound on the robustness of an observed trajectory prefix.
    Verify(VerifyArgs),
    /// Compute a (robust) conformal region from a score file.
    Calibrate(CalibrateArgs),
    /// Estimate the total-variation shift between score files.
    EstimateShift(ShiftArgs),
    /// Run a Monte Carlo coverage experiment from a config file.
    Experiment(ExperimentArgs),
    /// Write synthetic trajectories from an experiment config.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Budget {
    /// Failure probability.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Divergence budget between calibration and test distributions.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// f-divergence: tv, kl or chi2.
    #[arg(long, default_value = "tv")]
    divergence: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// STL formula, e.g. "G[0,105] (x0 >= 60)".
    #[arg(long)]
    formula: String,
    /// Calibration trajectories (CSV or JSON).
    #[arg(long)]
    calibration: PathBuf,
    /// Trajectories file holding the observed prefix (at least t+1 states).
    #[arg(long)]
    observed: PathBuf,
    /// Which trajectory of --observed to verify; required if it holds several.
    #[arg(long)]
    trajectory_id: Option<String>,
    /// Auxiliary trajectories for normalization constants / adaptive weights.
    #[arg(long)]
    aux: Option<PathBuf>,
    /// Predictor training trajectories (needed by ar:<p>).
    #[arg(long)]
    training: Option<PathBuf>,
    /// hold-last, constant-velocity, ar:<p> or external:<predictions.json>.
    #[arg(long, default_value = "hold-last")]
    predictor: String,
    /// Current time: states 0..=t are observed.
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    tau0: usize,
    /// direct, variant1, variant2 or adaptive-direct.
    #[arg(long, default_value = "direct")]
    method: String,
    #[command(flatten)]
    budget: Budget,
    /// Norm for state errors: l2 or linf.
    #[arg(long, default_value = "l2")]
    norm: String,
    /// Keep every k-th state of every trajectory before anything else.
    #[arg(long, default_value_t = 1)]
    downsample: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Scores, one per line (CSV) or a JSON array.
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    budget: Budget,
    /// Also write a score histogram CSV here.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    bins: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ShiftArgs {
    /// Score files taken as consecutive (calibration, test) pairs.
    #[arg(required = true, num_args = 2..)]
    files: Vec<PathBuf>,
    #[arg(long, default_value_t = rprv::shift::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value config; omitted keys take the running-example values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// A number or "estimate".
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    formula: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    downsample: Option<usize>,
    /// Directory for coverage.csv and per-trial histogram CSVs.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// train (noise sigma_train) or test (noise sigma_test).
    #[arg(long, default_value = "train")]
    side: String,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// .csv or .json; CSV on stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Error with the exit code it maps to.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn write_json<S: Serialize>(value: &S, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        None => {
            let mut w = io::stdout().lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn load(path: &Path, step: usize) -> Result<Vec<Trajectory>, Failure> {
    if step == 0 {
        return Err(Failure("--downsample must be at least 1".into()));
    }
    let xs = ingest_trajectories::<f64>(path, None)?;
    Ok(xs.iter().map(|x| x.downsampled(step)).collect())
}

fn verify(a: VerifyArgs) -> Outcome {
    let method: Method = a.method.parse()?;
    let norm: StateNorm = a.norm.parse()?;
    let calibration = load(&a.calibration, a.downsample)?;
    let dim = calibration.first().map_or(0, Trajectory::dim);
    let phi = Formula::parse(&a.formula, dim)?;
    let horizon = required_horizon(&phi, a.tau0, a.t)?;
    let aux = match &a.aux {
        Some(p) => load(p, a.downsample)?,
        None => Vec::new(),
    };
    let kind: PredictorKind = a.predictor.parse()?;
    let training = match (&kind, &a.training) {
        (_, Some(p)) => load(p, a.downsample)?,
        (PredictorKind::Autoregressive { .. }, None) => {
            return Err(Failure("an autoregressive predictor needs --training".into()))
        }
        _ => Vec::new(),
    };
    let model = fit_predictor(&training, a.t, horizon, &kind)?;
    let observed = load(&a.observed, a.downsample)?;
    let x = match &a.trajectory_id {
        Some(id) => observed
            .iter()
            .find(|x| x.id() == Some(id.as_str()))
            .ok_or_else(|| Failure(format!("no trajectory '{id}' in {}", a.observed.display())))?,
        None if observed.len() == 1 => &observed[0],
        None => {
            return Err(Failure(format!(
                "{} holds {} trajectories; pick one with --trajectory-id",
                a.observed.display(),
                observed.len()
            )))
        }
    };
    let kind: DivergenceKind = a.budget.divergence.parse()?;
    let mut cfg = VerifierConfig::new(method, a.budget.delta, kind.build(a.budget.epsilon)?, a.tau0);
    cfg.norm = norm;
    let verifier = Verifier::calibrate(&phi, &calibration, &aux, &model, cfg)?;
    let outcome = verifier.verify(x)?;
    write_json(&outcome, a.output.as_deref())?;
    Ok(outcome.region.feasible)
}

#[derive(Serialize)]
struct CalibrationOutput {
    #[serde(flatten)]
    region: PredictionRegion,
    min_calibration_size: CalibrationSize,
}

fn calibrate(a: CalibrateArgs) -> Outcome {
    let scores = read_scores::<f64>(&a.scores)?;
    let kind: DivergenceKind = a.budget.divergence.parse()?;
    let div = kind.build(a.budget.epsilon)?;
    let region = robust_quantile(&scores, a.budget.delta, &div)?;
    if let Some(h) = &a.histogram {
        write_histogram_csv(&scores, a.bins, h)?;
    }
    let out = CalibrationOutput {
        region,
        min_calibration_size: min_calibration_size(a.budget.delta, &div)?,
    };
    write_json(&out, a.output.as_deref())?;
    Ok(region.feasible)
}

fn estimate_shift(a: ShiftArgs) -> Outcome {
    if !a.files.len().is_multiple_of(2) {
        return Err(Failure(format!(
            "score files come in (calibration, test) pairs; got {}",
            a.files.len()
        )));
    }
    let pairs = a
        .files
        .chunks(2)
        .map(|p| Ok((read_scores::<f64>(&p[0])?, read_scores::<f64>(&p[1])?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let grid = TvGrid {
        points: a.grid_points,
        ..TvGrid::default()
    };
    write_json(&estimate_epsilon(&pairs, grid)?, a.output.as_deref())?;
    Ok(true)
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn experiment(a: ExperimentArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(m) = &a.method {
        cfg.method = m.parse()?;
    }
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(e) = &a.epsilon {
        cfg.epsilon = e.parse::<EpsilonSetting>()?;
    }
    if let Some(f) = a.formula {
        cfg.formula = f;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(d) = a.downsample {
        cfg.downsample = d;
    }
    cfg.validate()?;
    let start = Instant::now();
    let report = run_coverage_experiment::<f64>(&cfg)?;
    info!(
        "{} trials in {:.2}s: coverage {:.4} (epsilon = 0: {:.4})",
        cfg.trials,
        start.elapsed().as_secs_f64(),
        report.mean_coverage,
        report.baseline_mean_coverage
    );
    if let Some(dir) = &a.csv_dir {
        write_report_csvs(&report, dir)?;
    }
    write_json(&report, a.output.as_deref())?;
    Ok(report.all_feasible)
}

fn generate(a: GenerateArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let side = match a.side.as_str() {
        "train" => Side::Train,
        "test" => Side::Test,
        other => return Err(Failure(format!("--side must be train or test, got '{other}'"))),
    };
    let xs: Vec<Trajectory> = generate_synthetic(&cfg.synthetic()?, side, a.count)?
        .iter()
        .map(|x| x.downsampled(cfg.downsample.max(1)))
        .collect();
    match &a.output {
        Some(p) => write_trajectories(&xs, p)?,
        None => write_trajectories_csv(&xs, io::stdout().lock())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Calibrate(a) => calibrate(a),
        Command::EstimateShift(a) => estimate_shift(a),
        Command::Experiment(a) => experiment(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("rprv: configuration infeasible: the prediction region is infinite");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure(msg)) => {
            eprintln!("rprv: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
