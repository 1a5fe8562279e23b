//! Locally adaptive score weights `omega(X_obs)`.
//!
//! Scores are divided by a positive weight computed from the observed
//! prefix; at test time the calibrated region is multiplied by the weight of
//! the test prefix.

use serde::{Deserialize, Serialize};

use super::RprvError;
use crate::conformal::{Provenance, ScoreSet};
use crate::scalar::Scalar;
use crate::stl::Trajectory;

/// Default number of neighbours.
pub const DEFAULT_K: usize = 10;
/// Default number of most recent observed states used as k-NN features.
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_OMEGA_FLOOR: f64 = 1e-6;

/// Estimator of the typical score magnitude from an observed prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdaptiveWeightModel<T> {
    Constant { omega: T },
    /// Mean `|R|` of the `k` reference prefixes closest in Euclidean
    /// distance over the last `window` observed states, floored.
    Knn {
        k: usize,
        window: usize,
        t: usize,
        floor: T,
        points: Vec<Vec<T>>,
        magnitudes: Vec<T>,
    },
}

impl<T: Scalar> AdaptiveWeightModel<T> {
    pub fn constant(omega: T) -> Result<Self, RprvError> {
        if !(omega > T::zero() && omega.is_finite()) {
            return Err(RprvError::InvalidWeight(omega.to_f64_lossy()));
        }
        Ok(Self::Constant { omega })
    }

    /// Fits a k-NN weight on reference trajectories (observed up to `t`)
    /// and their scores. The reference set should be disjoint from the
    /// calibration set.
    pub fn fit_knn(
        reference: &[Trajectory<T>],
        scores: &[T],
        t: usize,
        k: usize,
        window: usize,
        floor: T,
    ) -> Result<Self, RprvError> {
        if reference.is_empty() {
            return Err(RprvError::EmptyAux);
        }
        if reference.len() != scores.len() {
            return Err(RprvError::Mismatch {
                what: "reference scores",
                expected: reference.len(),
                found: scores.len(),
            });
        }
        if k == 0 || window == 0 {
            return Err(RprvError::InvalidNeighbours);
        }
        if !(floor > T::zero() && floor.is_finite()) {
            return Err(RprvError::InvalidWeight(floor.to_f64_lossy()));
        }
        let window = window.min(t + 1);
        let points = reference
            .iter()
            .map(|x| features(x, t, window))
            .collect::<Result<_, _>>()?;
        Ok(Self::Knn {
            k: k.min(reference.len()),
            window,
            t,
            floor,
            points,
            magnitudes: scores.iter().map(|s| s.abs()).collect(),
        })
    }

    /// `omega(X_obs) > 0`.
    pub fn weight(&self, observed: &Trajectory<T>) -> Result<T, RprvError> {
        match self {
            Self::Constant { omega } => Ok(*omega),
            Self::Knn {
                k,
                window,
                t,
                floor,
                points,
                magnitudes,
            } => {
                let q = features(observed, *t, *window)?;
                let mut d: Vec<(T, usize)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let s = p.iter().zip(&q).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
                        (s, i)
                    })
                    .collect();
                let k = (*k).min(d.len());
                d.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
                let mean = d[..k].iter().map(|&(_, i)| magnitudes[i]).sum::<T>() / T::from_count(k);
                Ok(mean.max(*floor))
            }
        }
    }
}

fn features<T: Scalar>(x: &Trajectory<T>, t: usize, window: usize) -> Result<Vec<T>, RprvError> {
    if x.len() < t + 1 {
        return Err(RprvError::PrefixTooShort {
            expected: t + 1,
            found: x.len(),
        });
    }
    Ok((t + 1 - window..=t).flat_map(|tau| x.state(tau).iter().copied()).collect())
}

/// `R_i / omega(X_obs_i)`.
pub fn adaptive_rescale<T: Scalar>(
    scores: &ScoreSet<T>,
    omega: &AdaptiveWeightModel<T>,
    prefixes: &[Trajectory<T>],
) -> Result<ScoreSet<T>, RprvError> {
    if prefixes.len() != scores.len() {
        return Err(RprvError::Mismatch {
            what: "prefixes",
            expected: scores.len(),
            found: prefixes.len(),
        });
    }
    let v = scores
        .values()
        .iter()
        .zip(prefixes)
        .map(|(&r, x)| Ok(r / omega.weight(x)?))
        .collect::<Result<Vec<_>, RprvError>>()?;
    Ok(ScoreSet::new(v, Provenance::Adaptive)?)
}
