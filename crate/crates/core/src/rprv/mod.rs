//! Robust predictive runtime verification.
//!
//! From calibration trajectories drawn before a distribution shift, a
//! predictor and the observed prefix `X_0..X_t` of a test trajectory, each
//! method returns `rho*` such that `rho(X, tau0) >= rho*` with probability at
//! least `1 - delta` whenever the test distribution lies within `epsilon` of
//! the calibration distribution in the chosen f-divergence.
//!
//! * direct: conformalizes `rho(X^) - rho(X)`;
//! * variant1: conformalizes normalized state errors and bounds each
//!   predicate by its infimum over the resulting ball;
//! * variant2: conformalizes normalized predicate errors;
//! * adaptive-direct: direct scores divided by a prefix-dependent weight.
//!
//! The indirect methods need an auxiliary set, independent of calibration,
//! for the normalization constants (and the adaptive one for its weights).
//! `epsilon = 0` gives the non-robust baseline.

mod adaptive;
mod ball;
mod scores;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaptive::{
    adaptive_rescale, AdaptiveWeightModel, DEFAULT_K, DEFAULT_OMEGA_FLOOR, DEFAULT_WINDOW,
};
pub use ball::predicate_ball_infimum;
pub use scores::{
    direct_scores, normalization_constants, predicted_read_pairs, variant1_scores,
    variant2_scores, NormalizationConstants, DEFAULT_ALPHA_FLOOR,
};

use crate::conformal::{robust_quantile, ConformalError, FDivergence, PredictionRegion, ScoreSet};
use crate::predictors::{PredictorError, PredictorModel};
use crate::scalar::Scalar;
use crate::serde_ext::ext_scalar;
use crate::stl::{
    eval_probabilistic_robustness, eval_robustness, EvalError, Formula, PredicateBoundMap,
    Trajectory,
};

#[derive(Debug, Error)]
pub enum RprvError {
    #[error("prediction horizon must be {expected} (tau0 + formula length - t), model has {found}")]
    Horizon { expected: usize, found: usize },
    #[error("observation time t = {t} already covers the formula (tau0 + length = {end}); nothing to predict")]
    NothingToPredict { t: usize, end: usize },
    #[error("trajectory {index} has {found} states, needs {needed}")]
    TooShort {
        index: usize,
        needed: usize,
        found: usize,
    },
    #[error("observed prefix has {found} states, needs {expected}")]
    PrefixTooShort { expected: usize, found: usize },
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("auxiliary set is empty")]
    EmptyAux,
    #[error("{what}: expected {expected}, found {found}")]
    Mismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("weights and floors must be positive and finite, got {0}")]
    InvalidWeight(f64),
    #[error("neighbour count and window must be positive")]
    InvalidNeighbours,
    #[error("normalization constants mention unknown predicate '{0}'")]
    UnknownPredicate(String),
    #[error("unknown method '{0}' (direct, variant1, variant2, adaptive-direct)")]
    UnknownMethod(String),
    #[error("unknown norm '{0}' (l2, linf)")]
    UnknownNorm(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Variant1,
    Variant2,
    AdaptiveDirect,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Direct,
        Method::Variant1,
        Method::Variant2,
        Method::AdaptiveDirect,
    ];

    pub fn is_indirect(self) -> bool {
        matches!(self, Method::Variant1 | Method::Variant2)
    }

    pub fn needs_aux(self) -> bool {
        self != Method::Direct
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Variant1 => "variant1",
            Method::Variant2 => "variant2",
            Method::AdaptiveDirect => "adaptive-direct",
        })
    }
}

impl FromStr for Method {
    type Err = RprvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s.trim())
            .ok_or_else(|| RprvError::UnknownMethod(s.to_string()))
    }
}

/// Norm of state prediction errors (and of the balls built from them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateNorm {
    #[default]
    L2,
    LInf,
}

impl FromStr for StateNorm {
    type Err = RprvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "l2" => Ok(Self::L2),
            "linf" => Ok(Self::LInf),
            _ => Err(RprvError::UnknownNorm(s.to_string())),
        }
    }
}

impl fmt::Display for StateNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L2 => "l2",
            Self::LInf => "linf",
        })
    }
}

/// Certified lower bound and the data behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VerificationOutcome<T: Scalar> {
    /// `rho*`; `-inf` when the region is infeasible.
    #[serde(with = "ext_scalar")]
    pub rho_star: T,
    pub region: PredictionRegion<T>,
    /// Region actually applied: `C~`, or `C~ * omega` for the adaptive method.
    #[serde(with = "ext_scalar")]
    pub applied_region: T,
    /// `omega(X_obs)` for the adaptive method.
    pub omega: Option<T>,
    /// `rho(X^, tau0)` for the direct methods.
    pub predicted_robustness: Option<T>,
    /// `1 - delta`.
    pub confidence: T,
    pub method: Method,
    /// `rho*_{pi,tau}` for the indirect methods.
    pub predicate_bounds: Option<PredicateBoundMap<T>>,
    /// `rho* > 0`.
    pub satisfied: bool,
}

/// Monitor settings.
#[derive(Debug, Clone)]
pub struct VerifierConfig<T: Scalar> {
    pub method: Method,
    pub delta: T,
    pub divergence: FDivergence<T>,
    pub tau0: usize,
    pub norm: StateNorm,
    pub alpha_floor: T,
    pub knn_k: usize,
    pub knn_window: usize,
    pub omega_floor: T,
}

impl<T: Scalar> VerifierConfig<T> {
    pub fn new(method: Method, delta: T, divergence: FDivergence<T>, tau0: usize) -> Self {
        Self {
            method,
            delta,
            divergence,
            tau0,
            norm: StateNorm::L2,
            alpha_floor: T::lit(DEFAULT_ALPHA_FLOOR),
            knn_k: DEFAULT_K,
            knn_window: DEFAULT_WINDOW,
            omega_floor: T::lit(DEFAULT_OMEGA_FLOOR),
        }
    }
}

/// `H = tau0 + L - t`.
pub fn required_horizon<T: Scalar>(phi: &Formula<T>, tau0: usize, t: usize) -> Result<usize, RprvError> {
    let end = tau0 + phi.length();
    if t >= end {
        return Err(RprvError::NothingToPredict { t, end });
    }
    Ok(end - t)
}

pub(crate) fn check_model<T: Scalar>(
    phi: &Formula<T>,
    model: &PredictorModel<T>,
    tau0: usize,
) -> Result<(), RprvError> {
    let expected = required_horizon(phi, tau0, model.t())?;
    if model.horizon() != expected {
        return Err(RprvError::Horizon {
            expected,
            found: model.horizon(),
        });
    }
    Ok(())
}

pub(crate) fn check_lengths<T: Scalar>(xs: &[Trajectory<T>], needed: usize) -> Result<(), RprvError> {
    if xs.is_empty() {
        return Err(RprvError::EmptyCalibration);
    }
    match xs.iter().position(|x| x.len() < needed) {
        Some(index) => Err(RprvError::TooShort {
            index,
            needed,
            found: xs[index].len(),
        }),
        None => Ok(()),
    }
}

/// A calibrated monitor: scores and region are computed once, then any
/// number of test prefixes can be verified.
#[derive(Debug, Clone)]
pub struct Verifier<'m, T: Scalar> {
    phi: Formula<T>,
    model: &'m PredictorModel<T>,
    config: VerifierConfig<T>,
    scores: ScoreSet<T>,
    region: PredictionRegion<T>,
    alphas: Option<NormalizationConstants<T>>,
    omega: Option<AdaptiveWeightModel<T>>,
}

impl<'m, T: Scalar> Verifier<'m, T> {
    /// Calibrates on `calibration`; `aux` feeds the normalization constants
    /// (indirect methods) or the adaptive weights and may be empty for the
    /// direct method.
    pub fn calibrate(
        phi: &Formula<T>,
        calibration: &[Trajectory<T>],
        aux: &[Trajectory<T>],
        model: &'m PredictorModel<T>,
        config: VerifierConfig<T>,
    ) -> Result<Self, RprvError> {
        let phi = phi.to_pnf();
        let tau0 = config.tau0;
        check_model(&phi, model, tau0)?;
        let mut alphas = None;
        let mut omega = None;
        let scores = match config.method {
            Method::Direct => direct_scores(&phi, calibration, model, tau0)?,
            Method::Variant1 | Method::Variant2 => {
                let a = normalization_constants(&phi, aux, model, tau0, config.norm, config.alpha_floor)?;
                let s = if config.method == Method::Variant1 {
                    variant1_scores(calibration, model, &a)?
                } else {
                    variant2_scores(&phi, calibration, model, &a)?
                };
                alphas = Some(a);
                s
            }
            Method::AdaptiveDirect => {
                if aux.is_empty() {
                    return Err(RprvError::EmptyAux);
                }
                let reference = direct_scores(&phi, aux, model, tau0)?;
                let w = AdaptiveWeightModel::fit_knn(
                    aux,
                    reference.values(),
                    model.t(),
                    config.knn_k,
                    config.knn_window,
                    config.omega_floor,
                )?;
                let raw = direct_scores(&phi, calibration, model, tau0)?;
                let s = adaptive_rescale(&raw, &w, calibration)?;
                omega = Some(w);
                s
            }
        };
        let region = robust_quantile(&scores, config.delta, &config.divergence)?;
        Ok(Self {
            phi,
            model,
            config,
            scores,
            region,
            alphas,
            omega,
        })
    }

    /// The same calibration under another divergence budget, e.g. `epsilon = 0`.
    pub fn with_divergence(&self, divergence: FDivergence<T>) -> Result<Self, RprvError> {
        let region = robust_quantile(&self.scores, self.config.delta, &divergence)?;
        let mut out = self.clone();
        out.config.divergence = divergence;
        out.region = region;
        Ok(out)
    }

    pub fn formula(&self) -> &Formula<T> {
        &self.phi
    }

    pub fn config(&self) -> &VerifierConfig<T> {
        &self.config
    }

    pub fn scores(&self) -> &ScoreSet<T> {
        &self.scores
    }

    pub fn region(&self) -> &PredictionRegion<T> {
        &self.region
    }

    pub fn normalization(&self) -> Option<&NormalizationConstants<T>> {
        self.alphas.as_ref()
    }

    pub fn weights(&self) -> Option<&AdaptiveWeightModel<T>> {
        self.omega.as_ref()
    }

    /// Verifies a test trajectory from its first `t + 1` states; longer
    /// inputs are truncated.
    pub fn verify(&self, observed: &Trajectory<T>) -> Result<VerificationOutcome<T>, RprvError> {
        let t = self.model.t();
        if observed.len() < t + 1 {
            return Err(RprvError::PrefixTooShort {
                expected: t + 1,
                found: observed.len(),
            });
        }
        let prefix = observed.prefix(t + 1);
        let predicted = self.model.predict(&prefix)?;
        let tau0 = self.config.tau0;
        let c = self.region.value;
        let feasible = self.region.feasible;
        let mut omega = None;
        let mut predicted_robustness = None;
        let mut predicate_bounds = None;
        let (applied, rho_star) = match self.config.method {
            Method::Direct | Method::AdaptiveDirect => {
                let rho_hat = eval_robustness(&self.phi, &predicted.assembled(), tau0)?;
                predicted_robustness = Some(rho_hat);
                let applied = match &self.omega {
                    Some(w) => {
                        let w = w.weight(&prefix)?;
                        omega = Some(w);
                        self.region.scaled(w)
                    }
                    None => c,
                };
                (applied, rho_hat - applied)
            }
            Method::Variant1 | Method::Variant2 => {
                let alphas = self.alphas.as_ref().expect("indirect methods keep constants");
                let h = self.model.horizon();
                let mut bounds = PredicateBoundMap::new(t, h);
                for (p, taus) in predicted_read_pairs(&self.phi, tau0, t, h) {
                    for tau in taus {
                        let b = if self.config.method == Method::Variant1 {
                            let a = alphas.alpha(tau).expect("alpha for every predicted time");
                            predicate_ball_infimum(p, predicted.at(tau), c * a, alphas.norm())
                        } else {
                            let a = alphas
                                .alpha_pi(p.name(), tau)
                                .ok_or_else(|| RprvError::UnknownPredicate(p.name().to_string()))?;
                            p.eval(predicted.at(tau)) - c * a
                        };
                        bounds.insert(p.name(), tau, b);
                    }
                }
                let rho = eval_probabilistic_robustness(&self.phi, &prefix, &bounds, tau0)?;
                predicate_bounds = Some(bounds);
                (c, rho)
            }
        };
        let rho_star = if feasible { rho_star } else { T::neg_infinity() };
        Ok(VerificationOutcome {
            rho_star,
            region: self.region,
            applied_region: applied,
            omega,
            predicted_robustness,
            confidence: T::one() - self.config.delta,
            method: self.config.method,
            predicate_bounds,
            satisfied: rho_star > T::zero(),
        })
    }

    /// Verifies many test trajectories in parallel, preserving order.
    pub fn verify_all(&self, xs: &[Trajectory<T>]) -> Result<Vec<VerificationOutcome<T>>, RprvError> {
        xs.par_iter().map(|x| self.verify(x)).collect()
    }
}

/// Direct method on one observed prefix.
pub fn direct_verify<T: Scalar>(
    phi: &Formula<T>,
    calibration: &[Trajectory<T>],
    model: &PredictorModel<T>,
    observed: &Trajectory<T>,
    delta: T,
    divergence: &FDivergence<T>,
    tau0: usize,
) -> Result<VerificationOutcome<T>, RprvError> {
    let cfg = VerifierConfig::new(Method::Direct, delta, divergence.clone(), tau0);
    Verifier::calibrate(phi, calibration, &[], model, cfg)?.verify(observed)
}

/// Variant I (state-error balls) on one observed prefix.
#[allow(clippy::too_many_arguments)]
pub fn variant1_verify<T: Scalar>(
    phi: &Formula<T>,
    calibration: &[Trajectory<T>],
    aux: &[Trajectory<T>],
    model: &PredictorModel<T>,
    observed: &Trajectory<T>,
    delta: T,
    divergence: &FDivergence<T>,
    tau0: usize,
) -> Result<VerificationOutcome<T>, RprvError> {
    let cfg = VerifierConfig::new(Method::Variant1, delta, divergence.clone(), tau0);
    Verifier::calibrate(phi, calibration, aux, model, cfg)?.verify(observed)
}

/// Variant II (predicate errors) on one observed prefix.
#[allow(clippy::too_many_arguments)]
pub fn variant2_verify<T: Scalar>(
    phi: &Formula<T>,
    calibration: &[Trajectory<T>],
    aux: &[Trajectory<T>],
    model: &PredictorModel<T>,
    observed: &Trajectory<T>,
    delta: T,
    divergence: &FDivergence<T>,
    tau0: usize,
) -> Result<VerificationOutcome<T>, RprvError> {
    let cfg = VerifierConfig::new(Method::Variant2, delta, divergence.clone(), tau0);
    Verifier::calibrate(phi, calibration, aux, model, cfg)?.verify(observed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(v: &[f64]) -> Trajectory<f64> {
        Trajectory::scalar(v.to_vec()).unwrap()
    }

    fn constant_set(n: usize) -> Vec<Trajectory<f64>> {
        (0..n).map(|i| traj(&[i as f64 + 1.0; 4])).collect()
    }

    #[test]
    fn perfect_predictor_gives_predicted_robustness() {
        let phi = Formula::parse("G[0,3] (x0 >= 0.5)", 1).unwrap();
        let model = PredictorModel::hold_last(1, 2);
        let cal = constant_set(20);
        let aux = constant_set(5);
        let obs = traj(&[2.0, 2.0]);
        let tv = FDivergence::total_variation(0.05).unwrap();
        for method in Method::ALL {
            let cfg = VerifierConfig::new(method, 0.2, tv.clone(), 0);
            let v = Verifier::calibrate(&phi, &cal, &aux, &model, cfg).unwrap();
            let out = v.verify(&obs).unwrap();
            assert_eq!(out.rho_star, 1.5, "{method}");
            assert!(out.satisfied);
            assert_eq!(out.predicate_bounds.is_some(), method.is_indirect());
        }
    }

    #[test]
    fn infeasible_region_gives_neg_infinity() {
        let phi = Formula::parse("G[0,3] (x0 >= 0.5)", 1).unwrap();
        let model = PredictorModel::hold_last(1, 2);
        let cal = constant_set(3);
        let tv = FDivergence::total_variation(0.05).unwrap();
        let out = direct_verify(&phi, &cal, &model, &traj(&[2.0, 2.0]), 0.2, &tv, 0).unwrap();
        assert!(!out.region.feasible);
        assert_eq!(out.rho_star, f64::NEG_INFINITY);
        assert!(!out.satisfied);
        let json = serde_json::to_string(&out).unwrap();
        assert!(json.contains("\"rho_star\":\"-inf\""), "{json}");
    }

    #[test]
    fn methods_parse() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("direct2".parse::<Method>().is_err());
        assert_eq!("linf".parse::<StateNorm>().unwrap(), StateNorm::LInf);
    }

    #[test]
    fn required_horizon_rule() {
        let phi: Formula<f64> = Formula::parse("G[0,105] (x0 >= 60)", 1).unwrap();
        assert_eq!(required_horizon(&phi, 0, 100).unwrap(), 5);
        assert!(required_horizon(&phi, 0, 105).is_err());
    }
}
