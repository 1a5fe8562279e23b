//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that does arithmetic on states, robustness values or scores is
//! generic over [`Scalar`], which is implemented for `f32` and `f64`. The
//! exact total-variation chain in [`crate::conformal::exact`] additionally
//! runs over big rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable for trajectories, robustness values and scores.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + std::str::FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, panicking only for types that cannot hold it.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Ceiling that snaps values within a relative `1e-9` of an integer onto it.
///
/// Quantile indices such as `(K+1)(1-delta)` are exact integers in real
/// arithmetic far more often than their floating point images are.
pub fn snapped_ceil<T: Scalar>(x: T) -> T {
    let r = x.round();
    let tol = T::lit(1e-9) * T::one().max(x.abs());
    if (x - r).abs() <= tol {
        r
    } else {
        x.ceil()
    }
}

/// Euclidean norm of a slice.
pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Sum of absolute values.
pub fn norm1<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x.abs()).sum()
}

pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}
