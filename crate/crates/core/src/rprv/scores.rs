//! Nonconformity scores for the direct and indirect methods.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_model, check_lengths, RprvError, StateNorm};
use crate::conformal::{Provenance, ScoreSet};
use crate::predictors::{PredictedTrajectory, PredictorModel};
use crate::scalar::{norm2, norm_inf, Scalar};
use crate::stl::{eval_robustness, Formula, Predicate, Trajectory};

pub const DEFAULT_ALPHA_FLOOR: f64 = 1e-8;

/// `a - b`, with equal infinities (e.g. from `TRUE`) giving zero.
fn robustness_gap<T: Scalar>(a: T, b: T) -> T {
    if a == b {
        T::zero()
    } else {
        a - b
    }
}

fn state_error<T: Scalar>(x: &[T], xhat: &[T], norm: StateNorm) -> T {
    let d: Vec<T> = x.iter().zip(xhat).map(|(&a, &b)| a - b).collect();
    match norm {
        StateNorm::L2 => norm2(&d),
        StateNorm::LInf => norm_inf(&d),
    }
}

/// Predicates together with the predicted times `t+1 ..= t+H` at which the
/// formula evaluated at `tau0` reads them.
pub fn predicted_read_pairs<T: Scalar>(
    phi: &Formula<T>,
    tau0: usize,
    t: usize,
    horizon: usize,
) -> Vec<(&Predicate<T>, Vec<usize>)> {
    let preds = phi.predicates();
    phi.read_windows(tau0)
        .into_iter()
        .filter_map(|(name, (lo, hi))| {
            let lo = lo.max(t + 1);
            let hi = hi.min(t + horizon);
            (lo <= hi).then(|| (preds[name.as_str()], (lo..=hi).collect()))
        })
        .collect()
}

fn predict_all<T: Scalar>(
    xs: &[Trajectory<T>],
    model: &PredictorModel<T>,
) -> Result<Vec<PredictedTrajectory<T>>, RprvError> {
    xs.par_iter()
        .map(|x| Ok(model.predict_from(x)?))
        .collect()
}

/// Direct scores `rho(X^, tau0) - rho(X, tau0)`, one per trajectory in order.
pub fn direct_scores<T: Scalar>(
    phi: &Formula<T>,
    calibration: &[Trajectory<T>],
    model: &PredictorModel<T>,
    tau0: usize,
) -> Result<ScoreSet<T>, RprvError> {
    check_model(phi, model, tau0)?;
    check_lengths(calibration, model.t() + model.horizon() + 1)?;
    let v = calibration
        .par_iter()
        .map(|x| {
            let xhat = model.predict_from(x)?.assembled();
            Ok(robustness_gap(
                eval_robustness(phi, &xhat, tau0)?,
                eval_robustness(phi, x, tau0)?,
            ))
        })
        .collect::<Result<Vec<T>, RprvError>>()?;
    Ok(ScoreSet::new(v, Provenance::Direct)?)
}

/// Per-time and per-predicate normalization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConstants<T> {
    t: usize,
    horizon: usize,
    norm: StateNorm,
    /// `tau -> alpha_tau`.
    alpha_tau: BTreeMap<usize, T>,
    /// `predicate -> tau -> alpha_{pi,tau}`, for the pairs the formula reads.
    alpha_pi_tau: BTreeMap<String, BTreeMap<usize, T>>,
    floor: T,
    /// Some raw constant fell below `floor` and was raised to it.
    clamped: bool,
}

impl<T: Scalar> NormalizationConstants<T> {
    /// Builds constants from raw maxima, clamping to `floor`.
    pub fn from_raw(
        t: usize,
        horizon: usize,
        norm: StateNorm,
        alpha_tau: BTreeMap<usize, T>,
        alpha_pi_tau: BTreeMap<String, BTreeMap<usize, T>>,
        floor: T,
    ) -> Result<Self, RprvError> {
        if !(floor > T::zero() && floor.is_finite()) {
            return Err(RprvError::InvalidWeight(floor.to_f64_lossy()));
        }
        let mut clamped = false;
        let mut clamp = |v: T| {
            if v < floor || v.is_nan() {
                clamped = true;
                floor
            } else {
                v
            }
        };
        let alpha_tau = alpha_tau.into_iter().map(|(k, v)| (k, clamp(v))).collect();
        let alpha_pi_tau = alpha_pi_tau
            .into_iter()
            .map(|(n, m)| (n, m.into_iter().map(|(k, v)| (k, clamp(v))).collect()))
            .collect();
        if clamped {
            warn!("normalization constants below {floor} clamped");
        }
        Ok(Self {
            t,
            horizon,
            norm,
            alpha_tau,
            alpha_pi_tau,
            floor,
            clamped,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn norm(&self) -> StateNorm {
        self.norm
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn alpha(&self, tau: usize) -> Option<T> {
        self.alpha_tau.get(&tau).copied()
    }

    pub fn alpha_pi(&self, name: &str, tau: usize) -> Option<T> {
        self.alpha_pi_tau.get(name)?.get(&tau).copied()
    }

    pub fn alpha_tau(&self) -> &BTreeMap<usize, T> {
        &self.alpha_tau
    }

    pub fn alpha_pi_tau(&self) -> &BTreeMap<String, BTreeMap<usize, T>> {
        &self.alpha_pi_tau
    }

    /// Same constants with every `alpha_tau` replaced by their maximum: the
    /// unnormalized baseline.
    pub fn uniform(&self) -> Self {
        let m = self.alpha_tau.values().copied().fold(self.floor, T::max);
        Self {
            alpha_tau: self.alpha_tau.keys().map(|&k| (k, m)).collect(),
            ..self.clone()
        }
    }
}

/// Maximum state and predicate prediction errors over an auxiliary set that
/// is independent of the calibration set.
pub fn normalization_constants<T: Scalar>(
    phi: &Formula<T>,
    aux: &[Trajectory<T>],
    model: &PredictorModel<T>,
    tau0: usize,
    norm: StateNorm,
    floor: T,
) -> Result<NormalizationConstants<T>, RprvError> {
    if aux.is_empty() {
        return Err(RprvError::EmptyAux);
    }
    let phi = phi.to_pnf();
    check_model(&phi, model, tau0)?;
    let (t, h) = (model.t(), model.horizon());
    check_lengths(aux, t + h + 1)?;
    let pairs = predicted_read_pairs(&phi, tau0, t, h);
    let preds = predict_all(aux, model)?;

    let mut alpha_tau: BTreeMap<usize, T> = (t + 1..=t + h).map(|tau| (tau, T::zero())).collect();
    let mut alpha_pi_tau: BTreeMap<String, BTreeMap<usize, T>> = pairs
        .iter()
        .map(|(p, taus)| (p.name().to_string(), taus.iter().map(|&tau| (tau, T::zero())).collect()))
        .collect();
    for (x, p) in aux.iter().zip(&preds) {
        for (tau, a) in alpha_tau.iter_mut() {
            *a = a.max(state_error(x.state(*tau), p.at(*tau), norm));
        }
        for (pred, taus) in &pairs {
            let m = alpha_pi_tau.get_mut(pred.name()).expect("inserted above");
            for &tau in taus {
                let e = (pred.eval(p.at(tau)) - pred.eval(x.state(tau))).abs();
                let a = m.get_mut(&tau).expect("inserted above");
                *a = a.max(e);
            }
        }
    }
    NormalizationConstants::from_raw(t, h, norm, alpha_tau, alpha_pi_tau, floor)
}

/// State-error scores `max_tau ||X_tau - X^_tau|| / alpha_tau`.
pub fn variant1_scores<T: Scalar>(
    calibration: &[Trajectory<T>],
    model: &PredictorModel<T>,
    alphas: &NormalizationConstants<T>,
) -> Result<ScoreSet<T>, RprvError> {
    check_alphas(model, alphas)?;
    check_lengths(calibration, model.t() + model.horizon() + 1)?;
    let v = calibration
        .par_iter()
        .map(|x| {
            let p = model.predict_from(x)?;
            Ok(alphas
                .alpha_tau
                .iter()
                .map(|(&tau, &a)| state_error(x.state(tau), p.at(tau), alphas.norm) / a)
                .fold(T::zero(), T::max))
        })
        .collect::<Result<Vec<T>, RprvError>>()?;
    Ok(ScoreSet::new(v, Provenance::StateError)?)
}

/// Signed predicate-error scores
/// `max_(pi,tau) (h_pi(X^_tau) - h_pi(X_tau)) / alpha_{pi,tau}`.
///
/// The maximum runs over the predicted pairs the formula reads; a formula
/// that reads no predicted predicate gets score zero.
pub fn variant2_scores<T: Scalar>(
    phi: &Formula<T>,
    calibration: &[Trajectory<T>],
    model: &PredictorModel<T>,
    alphas: &NormalizationConstants<T>,
) -> Result<ScoreSet<T>, RprvError> {
    check_alphas(model, alphas)?;
    check_lengths(calibration, model.t() + model.horizon() + 1)?;
    let phi = phi.to_pnf();
    let preds = phi.predicates();
    let mut pairs = Vec::new();
    for (name, m) in &alphas.alpha_pi_tau {
        let p = *preds
            .get(name.as_str())
            .ok_or_else(|| RprvError::UnknownPredicate(name.clone()))?;
        pairs.extend(m.iter().map(|(&tau, &a)| (p, tau, a)));
    }
    let v = calibration
        .par_iter()
        .map(|x| {
            let xhat = model.predict_from(x)?;
            let s = pairs
                .iter()
                .map(|&(p, tau, a)| (p.eval(xhat.at(tau)) - p.eval(x.state(tau))) / a)
                .fold(T::neg_infinity(), T::max);
            Ok(if s.is_finite() { s } else { T::zero() })
        })
        .collect::<Result<Vec<T>, RprvError>>()?;
    Ok(ScoreSet::new(v, Provenance::PredicateError)?)
}

fn check_alphas<T: Scalar>(
    model: &PredictorModel<T>,
    alphas: &NormalizationConstants<T>,
) -> Result<(), RprvError> {
    if alphas.t != model.t() || alphas.horizon != model.horizon() {
        return Err(RprvError::Horizon {
            expected: model.horizon(),
            found: alphas.horizon,
        });
    }
    Ok(())
}
