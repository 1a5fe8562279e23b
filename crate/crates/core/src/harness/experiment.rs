//! Monte Carlo coverage studies.
//!
//! Each trial draws `K` calibration trajectories from the training side and
//! test trajectories from the shifted side, calibrates the chosen method and
//! records the fraction of tests with `rho(X, tau0) >= rho*`, both for the
//! configured budget and for `epsilon = 0`. Every random draw has its own
//! generator stream derived from the seed, so trials are independent of
//! scheduling and of one another.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use log::{info, warn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EpsilonSetting, ExperimentConfig};
use super::synthetic::{sample_around, stream_rng};
use super::HarnessError;
use crate::conformal::{
    robust_quantile, vanilla_quantile, FDivergence, Histogram, PredictionRegion, Provenance, ScoreSet,
};
use crate::predictors::{fit_predictor, PredictorModel};
use crate::rprv::{
    direct_scores, normalization_constants, required_horizon, variant1_scores, variant2_scores, Verifier,
    VerifierConfig,
};
use crate::scalar::Scalar;
use crate::serde_ext::ext_scalar;
use crate::shift::{estimate_epsilon, ShiftEstimate, TvGrid};
use crate::stl::{eval_robustness, Formula, Trajectory};

const STREAM_TRAINING: u64 = 0;
const STREAM_AUX: u64 = 1;
const STREAM_ESTIMATE_TRAIN: u64 = 2;
const STREAM_ESTIMATE_TEST: u64 = 3;
const STREAM_TRIALS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrialReport<T: Scalar> {
    pub index: usize,
    pub coverage: T,
    pub baseline_coverage: T,
    pub region: PredictionRegion<T>,
    /// `epsilon = 0` region from the same scores.
    pub baseline_region: PredictionRegion<T>,
    #[serde(with = "ext_scalar")]
    pub mean_rho_star: T,
    #[serde(with = "ext_scalar")]
    pub baseline_mean_rho_star: T,
    /// Calibration score histogram; counts sum to `K`.
    pub histogram: Histogram<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CoverageReport<T: Scalar> {
    pub config: ExperimentConfig,
    pub epsilon: T,
    pub shift: Option<ShiftEstimate<T>>,
    /// `1 - delta`.
    pub target: T,
    pub mean_coverage: T,
    pub baseline_mean_coverage: T,
    /// Binomial standard error of the mean coverage at the target level.
    pub standard_error: T,
    #[serde(with = "ext_scalar")]
    pub mean_rho_star: T,
    #[serde(with = "ext_scalar")]
    pub baseline_mean_rho_star: T,
    pub all_feasible: bool,
    pub baseline_all_feasible: bool,
    pub predictor_fallback: bool,
    pub alpha_clamped: bool,
    pub trials: Vec<TrialReport<T>>,
}

fn mean<T: Scalar>(v: impl ExactSizeIterator<Item = T>) -> T {
    let n = T::from_count(v.len().max(1));
    v.sum::<T>() / n
}

/// Shared, trial-independent state.
struct Setup<T: Scalar> {
    phi: Formula<T>,
    base: Trajectory<T>,
    model: PredictorModel<T>,
    aux: Vec<Trajectory<T>>,
    divergence: FDivergence<T>,
    shift: Option<ShiftEstimate<T>>,
}

fn downsample<T: Scalar>(xs: Vec<Trajectory<T>>, step: usize) -> Vec<Trajectory<T>> {
    if step == 1 {
        xs
    } else {
        xs.iter().map(|x| x.downsampled(step)).collect()
    }
}

fn draw<T: Scalar>(
    cfg: &ExperimentConfig,
    base: &Trajectory<T>,
    sigma: f64,
    count: usize,
    prefix: &str,
    stream: u64,
) -> Vec<Trajectory<T>> {
    let mut rng = stream_rng(cfg.seed, stream);
    downsample(sample_around(base, sigma, count, prefix, &mut rng), cfg.downsample)
}

impl<T: Scalar> Setup<T> {
    fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let spec = cfg.synthetic()?;
        let base = spec.base_trajectory::<T>()?;
        let phi = Formula::parse(&cfg.formula, base.dim())?;
        let horizon = required_horizon(&phi, cfg.tau0, cfg.t)?;
        let needed = cfg.t + horizon + 1;
        if base.downsampled(cfg.downsample).len() < needed {
            return Err(HarnessError::Config(format!(
                "trajectories have {} states after downsampling, the formula needs {needed}",
                base.downsampled(cfg.downsample).len()
            )));
        }
        let training = draw(cfg, &base, spec.sigma_train, cfg.training, "train-", STREAM_TRAINING);
        let model = fit_predictor(&training, cfg.t, horizon, &cfg.predictor_kind()?)?;
        if model.fell_back() {
            warn!("predictor fit degenerated; using hold-last");
        }
        let aux = draw(cfg, &base, spec.sigma_train, cfg.aux, "aux-", STREAM_AUX);
        let (epsilon, shift) = match cfg.epsilon {
            EpsilonSetting::Fixed(e) => (T::lit(e), None),
            EpsilonSetting::Estimate(_) => {
                let m = cfg.estimation_samples;
                let a = draw(cfg, &base, spec.sigma_train, m, "est-train-", STREAM_ESTIMATE_TRAIN);
                let b = draw(cfg, &base, spec.sigma_test, m, "est-test-", STREAM_ESTIMATE_TEST);
                let est = estimate_score_shift(&phi, &a, &b, &aux, &model, cfg)?;
                info!("estimated epsilon = {}", est.epsilon);
                (est.epsilon, Some(est))
            }
        };
        let divergence = cfg.divergence.build(epsilon)?;
        Ok(Self {
            phi,
            base,
            model,
            aux,
            divergence,
            shift,
        })
    }
}

/// Score-level TV between the two sides for every score type whose inputs
/// are available: direct always, state and predicate errors when `aux` is
/// nonempty. The combined estimate is the maximum.
pub fn estimate_score_shift<T: Scalar>(
    phi: &Formula<T>,
    train_side: &[Trajectory<T>],
    test_side: &[Trajectory<T>],
    aux: &[Trajectory<T>],
    model: &PredictorModel<T>,
    cfg: &ExperimentConfig,
) -> Result<ShiftEstimate<T>, HarnessError> {
    let mut pairs = vec![(
        direct_scores(phi, train_side, model, cfg.tau0)?,
        direct_scores(phi, test_side, model, cfg.tau0)?,
    )];
    if !aux.is_empty() {
        let floor = T::lit(crate::rprv::DEFAULT_ALPHA_FLOOR);
        let alphas = normalization_constants(phi, aux, model, cfg.tau0, cfg.norm, floor)?;
        pairs.push((
            variant1_scores(train_side, model, &alphas)?,
            variant1_scores(test_side, model, &alphas)?,
        ));
        pairs.push((
            variant2_scores(phi, train_side, model, &alphas)?,
            variant2_scores(phi, test_side, model, &alphas)?,
        ));
    }
    Ok(estimate_epsilon(&pairs, TvGrid::default())?)
}

fn run_trial<T: Scalar>(setup: &Setup<T>, cfg: &ExperimentConfig, index: usize) -> Result<TrialReport<T>, HarnessError> {
    let stream = STREAM_TRIALS + 2 * index as u64;
    let spec = cfg.synthetic()?;
    let cal = draw(cfg, &setup.base, spec.sigma_train, cfg.calibration, "cal-", stream);
    let tests = draw(cfg, &setup.base, spec.sigma_test, cfg.tests, "test-", stream + 1);
    let mut vcfg = VerifierConfig::new(cfg.method, T::lit(cfg.delta), setup.divergence.clone(), cfg.tau0);
    vcfg.norm = cfg.norm;
    vcfg.knn_k = cfg.knn_k;
    vcfg.knn_window = cfg.knn_window;
    let robust = Verifier::calibrate(&setup.phi, &cal, &setup.aux, &setup.model, vcfg)?;
    let baseline = robust.with_divergence(setup.divergence.with_epsilon(T::zero()))?;
    let mut hits = (0usize, 0usize);
    let mut rho = (Vec::with_capacity(tests.len()), Vec::with_capacity(tests.len()));
    for x in &tests {
        let truth = eval_robustness(&setup.phi, x, cfg.tau0)?;
        let a = robust.verify(x)?;
        let b = baseline.verify(x)?;
        hits.0 += usize::from(truth >= a.rho_star);
        hits.1 += usize::from(truth >= b.rho_star);
        rho.0.push(a.rho_star);
        rho.1.push(b.rho_star);
    }
    let n = T::from_count(tests.len());
    Ok(TrialReport {
        index,
        coverage: T::from_count(hits.0) / n,
        baseline_coverage: T::from_count(hits.1) / n,
        region: *robust.region(),
        baseline_region: *baseline.region(),
        mean_rho_star: mean(rho.0.into_iter()),
        baseline_mean_rho_star: mean(rho.1.into_iter()),
        histogram: robust.scores().histogram(cfg.histogram_bins),
    })
}

/// Runs the configured coverage study on the synthetic surrogate.
pub fn run_coverage_experiment<T: Scalar>(cfg: &ExperimentConfig) -> Result<CoverageReport<T>, HarnessError> {
    let setup = Setup::<T>::new(cfg)?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(&setup, cfg, i))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let target = T::one() - T::lit(cfg.delta);
    let draws = T::from_count(cfg.trials * cfg.tests);
    let alpha_clamped = match cfg.method {
        m if m.is_indirect() => normalization_constants(
            &setup.phi,
            &setup.aux,
            &setup.model,
            cfg.tau0,
            cfg.norm,
            T::lit(crate::rprv::DEFAULT_ALPHA_FLOOR),
        )?
        .clamped(),
        _ => false,
    };
    Ok(CoverageReport {
        config: cfg.clone(),
        epsilon: setup.divergence.epsilon(),
        shift: setup.shift,
        target,
        mean_coverage: mean(trials.iter().map(|t| t.coverage)),
        baseline_mean_coverage: mean(trials.iter().map(|t| t.baseline_coverage)),
        standard_error: (target * (T::one() - target) / draws).sqrt(),
        mean_rho_star: mean(trials.iter().map(|t| t.mean_rho_star)),
        baseline_mean_rho_star: mean(trials.iter().map(|t| t.baseline_mean_rho_star)),
        all_feasible: trials.iter().all(|t| t.region.feasible),
        baseline_all_feasible: trials.iter().all(|t| t.baseline_region.feasible),
        predictor_fallback: setup.model.fell_back(),
        alpha_clamped,
        trials,
    })
}

/// Writes `coverage.csv` (one row per trial) and `histogram_<i>.csv` files
/// next to a report, for external plotting.
pub fn write_report_csvs<T: Scalar>(report: &CoverageReport<T>, dir: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("coverage.csv")).map_err(io)?));
    w.write_record(["trial", "coverage", "baseline_coverage", "region", "baseline_region"])?;
    for t in &report.trials {
        w.write_record([
            t.index.to_string(),
            t.coverage.to_string(),
            t.baseline_coverage.to_string(),
            t.region.value.to_string(),
            t.baseline_region.value.to_string(),
        ])?;
    }
    w.flush().map_err(io)?;
    for t in &report.trials {
        let path = dir.join(format!("histogram_{}.csv", t.index));
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path).map_err(io)?));
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (i, c) in t.histogram.counts.iter().enumerate() {
            w.write_record([
                t.histogram.edges[i].to_string(),
                t.histogram.edges[i + 1].to_string(),
                c.to_string(),
            ])?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

/// Distribution of synthetic nonconformity scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoreLaw {
    Normal { mean: f64, sd: f64 },
    /// `(1 - weight) N(mean, sd^2) + weight N(outlier_mean, outlier_sd^2)`;
    /// its total variation from `N(mean, sd^2)` is at most `weight`.
    Contaminated {
        mean: f64,
        sd: f64,
        weight: f64,
        outlier_mean: f64,
        outlier_sd: f64,
    },
}

impl ScoreLaw {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match *self {
            Self::Normal { mean, sd } => mean + sd * z,
            Self::Contaminated {
                mean,
                sd,
                weight,
                outlier_mean,
                outlier_sd,
            } => {
                if rng.gen::<f64>() < weight {
                    outlier_mean + outlier_sd * z
                } else {
                    mean + sd * z
                }
            }
        }
    }
}

/// Coverage of `R_0 <= C` for i.i.d. synthetic scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreExperiment {
    pub calibration_law: ScoreLaw,
    pub test_law: ScoreLaw,
    pub calibration: usize,
    pub tests: usize,
    pub trials: usize,
    pub delta: f64,
    /// Total-variation budget of the robust arm.
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCoverageReport {
    pub coverage: Vec<f64>,
    pub baseline_coverage: Vec<f64>,
    pub mean_coverage: f64,
    pub baseline_mean_coverage: f64,
    pub target: f64,
    pub all_feasible: bool,
}

pub fn run_score_coverage<T: Scalar>(cfg: &ScoreExperiment) -> Result<ScoreCoverageReport, HarnessError> {
    if cfg.trials == 0 || cfg.tests == 0 {
        return Err(HarnessError::Config("trials and tests must be positive".into()));
    }
    let tv = FDivergence::<T>::total_variation(T::lit(cfg.epsilon))?;
    let delta = T::lit(cfg.delta);
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, STREAM_TRIALS + i as u64);
            let cal: Vec<T> = (0..cfg.calibration)
                .map(|_| T::lit(cfg.calibration_law.sample(&mut rng)))
                .collect();
            let scores = ScoreSet::new(cal, Provenance::External)?;
            let robust = robust_quantile(&scores, delta, &tv)?;
            let vanilla = vanilla_quantile(&scores, delta)?;
            let (mut a, mut b) = (0usize, 0usize);
            for _ in 0..cfg.tests {
                let r = T::lit(cfg.test_law.sample(&mut rng));
                a += usize::from(r <= robust.value);
                b += usize::from(r <= vanilla.value);
            }
            let n = cfg.tests as f64;
            Ok((a as f64 / n, b as f64 / n, robust.feasible))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let m = cfg.trials as f64;
    Ok(ScoreCoverageReport {
        mean_coverage: per_trial.iter().map(|p| p.0).sum::<f64>() / m,
        baseline_mean_coverage: per_trial.iter().map(|p| p.1).sum::<f64>() / m,
        coverage: per_trial.iter().map(|p| p.0).collect(),
        baseline_coverage: per_trial.iter().map(|p| p.1).collect(),
        target: 1.0 - cfg.delta,
        all_feasible: per_trial.iter().all(|p| p.2),
    })
}
