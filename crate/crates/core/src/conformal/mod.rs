//! Vanilla and robust split conformal quantiles.
//!
//! The robust quantile widens the conformal level so that coverage `1 - delta`
//! survives an `epsilon`-bounded f-divergence shift between calibration and
//! test scores: with `g`, `g^-1` from [`FDivergence`],
//!
//! ```text
//! 1 - delta_n = g((1 + 1/K) g^-1(1 - delta))
//! 1 - delta~  = g^-1(1 - delta_n)
//! C~          = Quantile_{1 - delta~}(R_1, ..., R_K)
//! ```

mod divergence;
pub mod exact;
mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use divergence::{DivergenceError, FDivergence, SOLVER_MAX_ITER, SOLVER_TOLERANCE};
pub use io::{
    read_scores, read_scores_csv, read_scores_json, write_histogram_csv, write_scores_csv,
    write_scores_json, ScoreIoError,
};

use crate::scalar::{snapped_ceil, Scalar};
use crate::serde_ext::ext_scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("score set is empty")]
    Empty,
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("failure probability delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("quantile level must be a number >= 0, got {0}")]
    InvalidLevel(f64),
}

/// Which nonconformity definition produced a score set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Predicted minus true formula robustness.
    Direct,
    /// Normalized state prediction error, maximized over the horizon.
    StateError,
    /// Normalized predicate robustness error, maximized over predicates and times.
    PredicateError,
    /// A score divided by a locally adaptive weight.
    Adaptive,
    /// Read from a file or produced by a caller.
    External,
}

/// A bag of `K >= 1` finite nonconformity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet<T> {
    scores: Vec<T>,
    provenance: Provenance,
}

impl<T: Scalar> ScoreSet<T> {
    pub fn new(scores: Vec<T>, provenance: Provenance) -> Result<Self, ConformalError> {
        if scores.is_empty() {
            return Err(ConformalError::Empty);
        }
        if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
            return Err(ConformalError::NonFinite { index });
        }
        Ok(Self { scores, provenance })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.scores
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn sorted(&self) -> Vec<T> {
        let mut v = self.scores.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        v
    }

    /// Equal-width histogram over `[min, max]`; counts sum to `K`.
    pub fn histogram(&self, bins: usize) -> Histogram<T> {
        let bins = bins.max(1);
        let lo = self.scores.iter().copied().fold(T::infinity(), T::min);
        let hi = self.scores.iter().copied().fold(T::neg_infinity(), T::max);
        let width = if hi > lo {
            (hi - lo) / T::from_count(bins)
        } else {
            T::one()
        };
        let mut counts = vec![0usize; bins];
        for &s in &self.scores {
            let k = ((s - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1);
            counts[k] += 1;
        }
        let edges = (0..=bins).map(|i| lo + width * T::from_count(i)).collect();
        Histogram { edges, counts }
    }
}

/// Bin edges (`bins + 1` values) and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub counts: Vec<usize>,
}

/// A calibrated region `C` or `C~` with its adjusted level.
///
/// `feasible` holds exactly when `value` is finite, which in turn holds
/// exactly when `adjusted_level <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PredictionRegion<T: Scalar> {
    #[serde(with = "ext_scalar")]
    pub value: T,
    pub adjusted_level: T,
    pub feasible: bool,
    pub delta: T,
    pub epsilon: T,
    pub calibration_size: usize,
    /// One-based order statistic used, when feasible.
    pub quantile_index: Option<usize>,
}

impl<T: Scalar> PredictionRegion<T> {
    /// Multiplies a finite region, e.g. by a local adaptive weight.
    pub fn scaled(&self, factor: T) -> T {
        if self.feasible {
            self.value * factor
        } else {
            T::infinity()
        }
    }
}

/// Minimum calibration size for a finite region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "k")]
pub enum CalibrationSize {
    Finite(usize),
    /// `g^-1(1 - delta) = 1`: no number of calibration scores suffices.
    Infeasible,
}

fn check_delta<T: Scalar>(delta: T) -> Result<(), ConformalError> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(ConformalError::InvalidDelta(delta.to_f64_lossy()));
    }
    Ok(())
}

/// `level <= 1` up to float noise in the product `(1 + 1/K) * gamma`.
fn level_fits<T: Scalar>(level: T) -> bool {
    level <= T::one() + T::lit(1e-12)
}

/// `(1 + 1/K) * gamma`.
fn corrected<T: Scalar>(k: usize, gamma: T) -> T {
    (T::one() + T::one() / T::from_count(k)) * gamma
}

/// Order statistic `ceil(level * K)` of ascending `sorted`.
///
/// Levels at or below `1/K` give the minimum, levels above one give `+inf`.
fn order_statistic<T: Scalar>(sorted: &[T], level: T) -> (T, Option<usize>) {
    let k = sorted.len();
    if !level_fits(level) {
        return (T::infinity(), None);
    }
    let idx = snapped_ceil(level * T::from_count(k))
        .to_usize()
        .unwrap_or(1)
        .clamp(1, k);
    (sorted[idx - 1], Some(idx))
}

/// Empirical quantile `inf { z : #{R_i <= z} / K >= level }`.
pub fn empirical_quantile<T: Scalar>(scores: &ScoreSet<T>, level: T) -> Result<T, ConformalError> {
    if level.is_nan() || level < T::zero() {
        return Err(ConformalError::InvalidLevel(level.to_f64_lossy()));
    }
    Ok(order_statistic(&scores.sorted(), level).0)
}

/// Non-robust conformal region `Quantile_{(1+1/K)(1-delta)}`.
pub fn vanilla_quantile<T: Scalar>(
    scores: &ScoreSet<T>,
    delta: T,
) -> Result<PredictionRegion<T>, ConformalError> {
    check_delta(delta)?;
    let k = scores.len();
    let level = corrected(k, T::one() - delta);
    let (value, quantile_index) = order_statistic(&scores.sorted(), level);
    Ok(PredictionRegion {
        value,
        adjusted_level: level,
        feasible: quantile_index.is_some(),
        delta,
        epsilon: T::zero(),
        calibration_size: k,
        quantile_index,
    })
}

/// Robust conformal region `C~` for scores calibrated under `div`.
pub fn robust_quantile<T: Scalar>(
    scores: &ScoreSet<T>,
    delta: T,
    div: &FDivergence<T>,
) -> Result<PredictionRegion<T>, ConformalError> {
    check_delta(delta)?;
    let k = scores.len();
    let gamma = div.g_inverse(T::one() - delta);
    let requested = corrected(k, gamma);
    let infeasible = PredictionRegion {
        value: T::infinity(),
        adjusted_level: requested,
        feasible: false,
        delta,
        epsilon: div.epsilon(),
        calibration_size: k,
        quantile_index: None,
    };
    if gamma >= T::one() || !level_fits(requested) {
        return Ok(infeasible);
    }
    let level = div.g_inverse(div.g(requested.min(T::one())));
    let (value, quantile_index) = order_statistic(&scores.sorted(), level);
    if quantile_index.is_none() {
        return Ok(PredictionRegion {
            adjusted_level: level,
            ..infeasible
        });
    }
    Ok(PredictionRegion {
        value,
        adjusted_level: level,
        feasible: true,
        delta,
        epsilon: div.epsilon(),
        calibration_size: k,
        quantile_index,
    })
}

/// Smallest `K` for which [`robust_quantile`] is finite.
pub fn min_calibration_size<T: Scalar>(
    delta: T,
    div: &FDivergence<T>,
) -> Result<CalibrationSize, ConformalError> {
    check_delta(delta)?;
    let gamma = div.g_inverse(T::one() - delta);
    if gamma >= T::one() {
        return Ok(CalibrationSize::Infeasible);
    }
    let raw = (gamma / (T::one() - gamma)).ceil().to_usize().unwrap_or(usize::MAX);
    let mut k = raw.max(1);
    // settle on the same tolerance rule robust_quantile applies
    while k > 1 && level_fits(corrected(k - 1, gamma)) {
        k -= 1;
    }
    while !level_fits(corrected(k, gamma)) {
        k += 1;
    }
    Ok(CalibrationSize::Finite(k))
}
