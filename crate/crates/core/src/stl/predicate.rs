use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{norm2, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("affine predicate has all-zero coefficients")]
    ZeroCoefficients,
    #[error("norm threshold must be nonnegative")]
    NegativeThreshold,
    #[error("selector and center lengths differ ({selector} vs {center})")]
    SelectorMismatch { selector: usize, center: usize },
    #[error("norm predicate selects no components")]
    EmptySelector,
    #[error("non-finite predicate parameter")]
    NonFinite,
}

/// Shape of the predicate function `h: R^n -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredicateKind<T> {
    /// `h(x) = a^T x + b`.
    Affine { coeffs: Vec<T>, offset: T },
    /// `h(x) = c - ||x_sel - p||_2`.
    NormInside {
        selector: Vec<usize>,
        center: Vec<T>,
        threshold: T,
    },
    /// `h(x) = ||x_sel - p||_2 - c`.
    NormOutside {
        selector: Vec<usize>,
        center: Vec<T>,
        threshold: T,
    },
}

/// A named atomic proposition `h(x) >= 0`.
///
/// Names identify predicates across a formula: two atoms with the same name
/// share their per-time bounds during indirect verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate<T> {
    name: String,
    #[serde(flatten)]
    kind: PredicateKind<T>,
}

impl<T: Scalar> Predicate<T> {
    pub fn affine(
        name: impl Into<String>,
        coeffs: Vec<T>,
        offset: T,
    ) -> Result<Self, PredicateError> {
        if coeffs.iter().all(|c| c.is_zero()) {
            return Err(PredicateError::ZeroCoefficients);
        }
        if !offset.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PredicateError::NonFinite);
        }
        Ok(Self {
            name: name.into(),
            kind: PredicateKind::Affine { coeffs, offset },
        })
    }

    pub fn norm_inside(
        name: impl Into<String>,
        selector: Vec<usize>,
        center: Vec<T>,
        threshold: T,
    ) -> Result<Self, PredicateError> {
        Self::check_norm(&selector, &center, threshold)?;
        Ok(Self {
            name: name.into(),
            kind: PredicateKind::NormInside {
                selector,
                center,
                threshold,
            },
        })
    }

    pub fn norm_outside(
        name: impl Into<String>,
        selector: Vec<usize>,
        center: Vec<T>,
        threshold: T,
    ) -> Result<Self, PredicateError> {
        Self::check_norm(&selector, &center, threshold)?;
        Ok(Self {
            name: name.into(),
            kind: PredicateKind::NormOutside {
                selector,
                center,
                threshold,
            },
        })
    }

    fn check_norm(selector: &[usize], center: &[T], threshold: T) -> Result<(), PredicateError> {
        if selector.is_empty() {
            return Err(PredicateError::EmptySelector);
        }
        if selector.len() != center.len() {
            return Err(PredicateError::SelectorMismatch {
                selector: selector.len(),
                center: center.len(),
            });
        }
        if !threshold.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(PredicateError::NonFinite);
        }
        if threshold < T::zero() {
            return Err(PredicateError::NegativeThreshold);
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &PredicateKind<T> {
        &self.kind
    }

    #[must_use]
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Smallest state dimension this predicate can be evaluated on.
    pub fn required_dim(&self) -> usize {
        match &self.kind {
            PredicateKind::Affine { coeffs, .. } => coeffs
                .iter()
                .rposition(|c| !c.is_zero())
                .map_or(0, |i| i + 1),
            PredicateKind::NormInside { selector, .. }
            | PredicateKind::NormOutside { selector, .. } => {
                selector.iter().max().map_or(0, |&i| i + 1)
            }
        }
    }

    /// Distance of the selected sub-state from the norm center.
    fn distance(selector: &[usize], center: &[T], x: &[T]) -> T {
        selector
            .iter()
            .zip(center)
            .map(|(&i, &p)| {
                let d = x[i] - p;
                d * d
            })
            .sum::<T>()
            .sqrt()
    }

    /// Evaluates `h(x)`.
    pub fn eval(&self, x: &[T]) -> T {
        match &self.kind {
            PredicateKind::Affine { coeffs, offset } => {
                coeffs.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>() + *offset
            }
            PredicateKind::NormInside {
                selector,
                center,
                threshold,
            } => *threshold - Self::distance(selector, center, x),
            PredicateKind::NormOutside {
                selector,
                center,
                threshold,
            } => Self::distance(selector, center, x) - *threshold,
        }
    }

    /// The predicate for `-h`, named `~name` (or `name` again when already negated).
    pub fn negated(&self) -> Self {
        let name = match self.name.strip_prefix('~') {
            Some(base) => base.to_string(),
            None => format!("~{}", self.name),
        };
        let kind = match &self.kind {
            PredicateKind::Affine { coeffs, offset } => PredicateKind::Affine {
                coeffs: coeffs.iter().map(|&c| -c).collect(),
                offset: -*offset,
            },
            PredicateKind::NormInside {
                selector,
                center,
                threshold,
            } => PredicateKind::NormOutside {
                selector: selector.clone(),
                center: center.clone(),
                threshold: *threshold,
            },
            PredicateKind::NormOutside {
                selector,
                center,
                threshold,
            } => PredicateKind::NormInside {
                selector: selector.clone(),
                center: center.clone(),
                threshold: *threshold,
            },
        };
        Self { name, kind }
    }

    /// Euclidean norm of the affine coefficient vector, if affine.
    pub fn gradient_norm(&self) -> Option<T> {
        match &self.kind {
            PredicateKind::Affine { coeffs, .. } => Some(norm2(coeffs)),
            _ => None,
        }
    }
}
