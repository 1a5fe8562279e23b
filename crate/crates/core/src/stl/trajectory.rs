use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrajectoryError {
    #[error("trajectory has no states")]
    Empty,
    #[error("state dimension must be at least 1")]
    ZeroDimension,
    #[error("state {index} has dimension {found}, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite component {component} at time {time}")]
    NonFinite { time: usize, component: usize },
}

/// A finite, uniformly sampled sequence of state vectors `x_0, ..., x_L`.
///
/// States are stored row-major in one buffer. The optional identifier links a
/// trajectory to externally supplied predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    id: Option<String>,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(states: Vec<Vec<T>>) -> Result<Self, TrajectoryError> {
        let dim = states.first().ok_or(TrajectoryError::Empty)?.len();
        let mut data = Vec::with_capacity(dim * states.len());
        for (index, s) in states.into_iter().enumerate() {
            if s.len() != dim {
                return Err(TrajectoryError::Ragged {
                    index,
                    expected: dim,
                    found: s.len(),
                });
            }
            data.extend(s);
        }
        Self::from_flat(dim, data)
    }

    /// Builds a trajectory from a row-major buffer of `len * dim` values.
    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self, TrajectoryError> {
        if dim == 0 {
            return Err(TrajectoryError::ZeroDimension);
        }
        if data.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(TrajectoryError::Ragged {
                index: data.len() / dim,
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TrajectoryError::NonFinite {
                time: pos / dim,
                component: pos % dim,
            });
        }
        Ok(Self {
            id: None,
            dim,
            data,
        })
    }

    /// One-dimensional trajectory from a plain signal.
    pub fn scalar(values: Vec<T>) -> Result<Self, TrajectoryError> {
        Self::from_flat(1, values)
    }

    #[must_use]
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states, `L + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Index of the last state, `L`.
    pub fn last_time(&self) -> usize {
        self.len() - 1
    }

    pub fn state(&self, time: usize) -> &[T] {
        &self.data[time * self.dim..(time + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// The first `count` states, keeping the identifier.
    ///
    /// # Panics
    /// If `count` is zero or exceeds the length.
    pub fn prefix(&self, count: usize) -> Self {
        assert!(count >= 1 && count <= self.len(), "prefix length out of range");
        Self {
            id: self.id.clone(),
            dim: self.dim,
            data: self.data[..count * self.dim].to_vec(),
        }
    }

    /// Appends states, e.g. predictions after an observed prefix.
    pub fn extended<'a, I>(&self, states: I) -> Result<Self, TrajectoryError>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut out = self.clone();
        for s in states {
            if s.len() != self.dim {
                return Err(TrajectoryError::Ragged {
                    index: out.len(),
                    expected: self.dim,
                    found: s.len(),
                });
            }
            if let Some(c) = s.iter().position(|v| !v.is_finite()) {
                return Err(TrajectoryError::NonFinite {
                    time: out.len(),
                    component: c,
                });
            }
            out.data.extend_from_slice(s);
        }
        Ok(out)
    }

    /// Keeps every `step`-th state starting at time 0.
    pub fn downsampled(&self, step: usize) -> Self {
        let step = step.max(1);
        let data = self
            .states()
            .step_by(step)
            .flat_map(|s| s.iter().copied())
            .collect();
        Self {
            id: self.id.clone(),
            dim: self.dim,
            data,
        }
    }

    pub fn to_states(&self) -> Vec<Vec<T>> {
        self.states().map(<[T]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_access() {
        let x = Trajectory::new(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(x.len(), 3);
        assert_eq!(x.dim(), 2);
        assert_eq!(x.state(1), &[3.0, 4.0]);
        assert_eq!(x.prefix(2).len(), 2);
        assert_eq!(x.downsampled(2).to_states(), vec![vec![1.0, 2.0], vec![5.0, 6.0]]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Trajectory::<f64>::new(vec![]), Err(TrajectoryError::Empty));
        assert!(matches!(
            Trajectory::new(vec![vec![1.0], vec![1.0, 2.0]]),
            Err(TrajectoryError::Ragged { index: 1, .. })
        ));
        assert!(matches!(
            Trajectory::scalar(vec![1.0, f64::NAN]),
            Err(TrajectoryError::NonFinite { time: 1, .. })
        ));
        assert_eq!(
            Trajectory::<f32>::new(vec![vec![]]),
            Err(TrajectoryError::ZeroDimension)
        );
    }

    #[test]
    fn extension_checks_dimension() {
        let x = Trajectory::new(vec![vec![1.0f64, 2.0]]).unwrap();
        let ok = x.extended([&[3.0, 4.0][..]]).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(x.extended([&[3.0][..]]).is_err());
    }
}
