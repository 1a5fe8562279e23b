//! Trajectory predictors mapping an observed prefix `X_0..X_t` to
//! predictions `X^_{t+1|t} .. X^_{t+H|t}`.
//!
//! The guarantees downstream hold for any predictor; these are baselines.
//! Learned models plug in through the external predictions file, a JSON map
//! from trajectory id to the `H` predicted state vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::stl::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("no training trajectories")]
    EmptyTraining,
    #[error("training trajectory {index} has {found} states, needs at least {needed}")]
    TooShort {
        index: usize,
        needed: usize,
        found: usize,
    },
    #[error("autoregressive order {order} must be in 1..=t (t = {t})")]
    InvalidOrder { order: usize, t: usize },
    #[error("{rows} regression rows cannot determine {unknowns} coefficients")]
    InsufficientData { rows: usize, unknowns: usize },
    #[error("observed prefix has {found} states, model expects {expected}")]
    PrefixLength { expected: usize, found: usize },
    #[error("state dimension {found} does not match model dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("trajectory has no identifier; external predictions are looked up by id")]
    MissingId,
    #[error("no external predictions for trajectory '{0}'")]
    UnknownId(String),
    #[error("external predictions for '{id}' have {found} steps, horizon is {expected}")]
    WrongHorizon {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown predictor kind '{0}' (hold-last, constant-velocity, ar:<p>, external:<path>)")]
    UnknownKind(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("external predictions: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Requested predictor family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorKind {
    HoldLast,
    ConstantVelocity,
    Autoregressive { order: usize },
    External { path: PathBuf },
}

impl FromStr for PredictorKind {
    type Err = PredictorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "hold-last" => return Ok(Self::HoldLast),
            "constant-velocity" => return Ok(Self::ConstantVelocity),
            _ => {}
        }
        if let Some(p) = s.strip_prefix("ar:").or_else(|| s.strip_prefix("autoregressive:")) {
            let order = p
                .parse()
                .map_err(|_| PredictorError::UnknownKind(s.to_string()))?;
            return Ok(Self::Autoregressive { order });
        }
        if let Some(p) = s.strip_prefix("external:") {
            return Ok(Self::External { path: p.into() });
        }
        Err(PredictorError::UnknownKind(s.to_string()))
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HoldLast => f.write_str("hold-last"),
            Self::ConstantVelocity => f.write_str("constant-velocity"),
            Self::Autoregressive { order } => write!(f, "ar:{order}"),
            Self::External { path } => write!(f, "external:{}", path.display()),
        }
    }
}

/// Fitted model state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model<T> {
    HoldLast,
    ConstantVelocity,
    /// Per component `j`: `x_{tau}[j] = sum_i coeffs[j][i] x_{tau-1-i}[j] + intercepts[j]`.
    Autoregressive {
        coeffs: Vec<Vec<T>>,
        intercepts: Vec<T>,
    },
    External {
        predictions: BTreeMap<String, Vec<Vec<T>>>,
    },
}

/// A predictor for a fixed observation time `t` and horizon `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel<T> {
    model: Model<T>,
    t: usize,
    horizon: usize,
    /// Set when fitting degenerated and the model fell back to hold-last.
    fallback: bool,
}

/// Observed prefix followed by `H` predicted states.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrajectory<T> {
    observed: Trajectory<T>,
    predicted: Vec<Vec<T>>,
}

impl<T: Scalar> PredictedTrajectory<T> {
    pub fn observed(&self) -> &Trajectory<T> {
        &self.observed
    }

    /// Predicted states for `t+1 ..= t+H`.
    pub fn predicted(&self) -> &[Vec<T>] {
        &self.predicted
    }

    pub fn t(&self) -> usize {
        self.observed.last_time()
    }

    pub fn horizon(&self) -> usize {
        self.predicted.len()
    }

    /// Prediction `X^_{tau|t}` for `t < tau <= t + H`.
    pub fn at(&self, tau: usize) -> &[T] {
        &self.predicted[tau - self.t() - 1]
    }

    /// `X^ = (X_obs, X^_{t+1|t}, ..., X^_{t+H|t})` as one trajectory.
    pub fn assembled(&self) -> Trajectory<T> {
        self.observed
            .extended(self.predicted.iter().map(Vec::as_slice))
            .expect("predictions validated at construction")
    }
}

impl<T: Scalar> PredictorModel<T> {
    pub fn hold_last(t: usize, horizon: usize) -> Self {
        Self {
            model: Model::HoldLast,
            t,
            horizon,
            fallback: false,
        }
    }

    pub fn constant_velocity(t: usize, horizon: usize) -> Self {
        Self {
            model: Model::ConstantVelocity,
            t,
            horizon,
            fallback: false,
        }
    }

    /// Autoregressive model with given per-component coefficients (most
    /// recent lag first) and intercepts.
    pub fn autoregressive(
        coeffs: Vec<Vec<T>>,
        intercepts: Vec<T>,
        t: usize,
        horizon: usize,
    ) -> Result<Self, PredictorError> {
        if coeffs.len() != intercepts.len() {
            return Err(PredictorError::Dimension {
                expected: coeffs.len(),
                found: intercepts.len(),
            });
        }
        let order = coeffs.first().map_or(0, Vec::len);
        if order == 0 || order > t || coeffs.iter().any(|c| c.len() != order) {
            return Err(PredictorError::InvalidOrder { order, t });
        }
        Ok(Self {
            model: Model::Autoregressive { coeffs, intercepts },
            t,
            horizon,
            fallback: false,
        })
    }

    /// Wraps externally produced predictions keyed by trajectory id.
    pub fn external(
        predictions: BTreeMap<String, Vec<Vec<T>>>,
        t: usize,
        horizon: usize,
    ) -> Result<Self, PredictorError> {
        let mut dim = None;
        for (id, steps) in &predictions {
            if steps.len() != horizon {
                return Err(PredictorError::WrongHorizon {
                    id: id.clone(),
                    expected: horizon,
                    found: steps.len(),
                });
            }
            for s in steps {
                let d = *dim.get_or_insert(s.len());
                if s.len() != d {
                    return Err(PredictorError::Dimension {
                        expected: d,
                        found: s.len(),
                    });
                }
            }
        }
        Ok(Self {
            model: Model::External { predictions },
            t,
            horizon,
            fallback: false,
        })
    }

    /// Loads an external predictions file.
    pub fn load_external(path: &Path, t: usize, horizon: usize) -> Result<Self, PredictorError> {
        let f = File::open(path).map_err(|source| PredictorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let predictions: BTreeMap<String, Vec<Vec<T>>> =
            serde_json::from_reader(BufReader::new(f))?;
        Self::external(predictions, t, horizon)
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    /// Observation time `t`; the model consumes prefixes of `t + 1` states.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn fell_back(&self) -> bool {
        self.fallback
    }

    /// Predicts from the first `t + 1` states of a (possibly longer) trajectory.
    pub fn predict_from(&self, x: &Trajectory<T>) -> Result<PredictedTrajectory<T>, PredictorError> {
        if x.len() < self.t + 1 {
            return Err(PredictorError::PrefixLength {
                expected: self.t + 1,
                found: x.len(),
            });
        }
        self.predict(&x.prefix(self.t + 1))
    }

    /// Predicts `H` future states from an observed prefix of `t + 1` states.
    pub fn predict(&self, observed: &Trajectory<T>) -> Result<PredictedTrajectory<T>, PredictorError> {
        if observed.len() != self.t + 1 {
            return Err(PredictorError::PrefixLength {
                expected: self.t + 1,
                found: observed.len(),
            });
        }
        let dim = observed.dim();
        let last = observed.state(self.t);
        let predicted: Vec<Vec<T>> = match &self.model {
            Model::HoldLast => vec![last.to_vec(); self.horizon],
            Model::ConstantVelocity => {
                let prev = if self.t >= 1 {
                    observed.state(self.t - 1)
                } else {
                    last
                };
                (1..=self.horizon)
                    .map(|k| {
                        let k = T::from_count(k);
                        last.iter()
                            .zip(prev)
                            .map(|(&l, &p)| l + k * (l - p))
                            .collect()
                    })
                    .collect()
            }
            Model::Autoregressive { coeffs, intercepts } => {
                if coeffs.len() != dim {
                    return Err(PredictorError::Dimension {
                        expected: coeffs.len(),
                        found: dim,
                    });
                }
                let order = coeffs[0].len();
                let mut out = vec![vec![T::zero(); dim]; self.horizon];
                for j in 0..dim {
                    // history, most recent last
                    let mut hist: Vec<T> = (self.t + 1 - order..=self.t)
                        .map(|tau| observed.state(tau)[j])
                        .collect();
                    for step in out.iter_mut() {
                        let next = coeffs[j]
                            .iter()
                            .zip(hist.iter().rev())
                            .map(|(&c, &v)| c * v)
                            .sum::<T>()
                            + intercepts[j];
                        step[j] = next;
                        hist.push(next);
                    }
                }
                out
            }
            Model::External { predictions } => {
                let id = observed.id().ok_or(PredictorError::MissingId)?;
                let p = predictions
                    .get(id)
                    .ok_or_else(|| PredictorError::UnknownId(id.to_string()))?;
                if let Some(s) = p.first() {
                    if s.len() != dim {
                        return Err(PredictorError::Dimension {
                            expected: s.len(),
                            found: dim,
                        });
                    }
                }
                p.clone()
            }
        };
        // rejects non-finite predictions before they reach the semantics
        observed.extended(predicted.iter().map(Vec::as_slice))?;
        Ok(PredictedTrajectory {
            observed: observed.clone(),
            predicted,
        })
    }
}

/// Writes predictions in the external predictions file format.
pub fn write_external_predictions<T: Scalar>(
    predictions: &BTreeMap<String, Vec<Vec<T>>>,
    path: &Path,
) -> Result<(), PredictorError> {
    let f = File::create(path).map_err(|source| PredictorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(f), predictions)?;
    Ok(())
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when a pivot vanishes relative to the matrix scale.
fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |m, &v| m.max(v.abs()))
        .max(T::min_positive_value());
    let tiny = scale * T::epsilon() * T::from_count(n * 16);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        let pivot = a[piv][col].abs();
        if pivot.is_nan() || pivot <= tiny {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor.is_zero() {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (dst, &src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst -= factor * src;
            }
            let delta = factor * b[col];
            b[row] -= delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).map(|k| a[row][k] * x[k]).sum::<T>();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Per-component lag coefficients and intercepts.
type ArFit<T> = (Vec<Vec<T>>, Vec<T>);

/// Least-squares AR(`order`) with intercept, one regression per component,
/// over every lag window in the training set.
fn fit_autoregressive<T: Scalar>(
    training: &[Trajectory<T>],
    order: usize,
) -> Result<Option<ArFit<T>>, PredictorError> {
    let dim = training[0].dim();
    let unknowns = order + 1;
    let rows: usize = training.iter().map(|x| x.len().saturating_sub(order)).sum();
    if rows < unknowns {
        return Err(PredictorError::InsufficientData { rows, unknowns });
    }
    let mut coeffs = Vec::with_capacity(dim);
    let mut intercepts = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut ata = vec![vec![T::zero(); unknowns]; unknowns];
        let mut atb = vec![T::zero(); unknowns];
        let mut row = vec![T::zero(); unknowns];
        for x in training {
            for tau in order..x.len() {
                for (i, r) in row[..order].iter_mut().enumerate() {
                    *r = x.state(tau - 1 - i)[j];
                }
                row[order] = T::one();
                let y = x.state(tau)[j];
                for r in 0..unknowns {
                    atb[r] += row[r] * y;
                    for c in 0..unknowns {
                        ata[r][c] += row[r] * row[c];
                    }
                }
            }
        }
        match solve_linear(ata, atb) {
            Some(sol) => {
                intercepts.push(sol[order]);
                coeffs.push(sol[..order].to_vec());
            }
            None => return Ok(None),
        }
    }
    Ok(Some((coeffs, intercepts)))
}

/// Fits a predictor for observation time `t` and horizon `H`.
///
/// Training trajectories must hold at least `t + 1 + H` states and should be
/// disjoint from any calibration data. A singular autoregression falls back
/// to hold-last and sets [`PredictorModel::fell_back`].
pub fn fit_predictor<T: Scalar>(
    training: &[Trajectory<T>],
    t: usize,
    horizon: usize,
    kind: &PredictorKind,
) -> Result<PredictorModel<T>, PredictorError> {
    match kind {
        PredictorKind::HoldLast => return Ok(PredictorModel::hold_last(t, horizon)),
        PredictorKind::ConstantVelocity => return Ok(PredictorModel::constant_velocity(t, horizon)),
        PredictorKind::External { path } => return PredictorModel::load_external(path, t, horizon),
        PredictorKind::Autoregressive { .. } => {}
    }
    let PredictorKind::Autoregressive { order } = *kind else {
        unreachable!()
    };
    if order == 0 || order > t {
        return Err(PredictorError::InvalidOrder { order, t });
    }
    let first = training.first().ok_or(PredictorError::EmptyTraining)?;
    let needed = t + 1 + horizon;
    for (index, x) in training.iter().enumerate() {
        if x.len() < needed {
            return Err(PredictorError::TooShort {
                index,
                needed,
                found: x.len(),
            });
        }
        if x.dim() != first.dim() {
            return Err(PredictorError::Dimension {
                expected: first.dim(),
                found: x.dim(),
            });
        }
    }
    match fit_autoregressive(training, order)? {
        Some((coeffs, intercepts)) => PredictorModel::autoregressive(coeffs, intercepts, t, horizon),
        None => {
            warn!("singular autoregressive fit (order {order}); falling back to hold-last");
            Ok(PredictorModel {
                fallback: true,
                ..PredictorModel::hold_last(t, horizon)
            })
        }
    }
}
