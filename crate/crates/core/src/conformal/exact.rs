//! Total-variation closed forms over any ordered field.
//!
//! The same functions back the floating point path and an exact
//! big-rational path, which pins quantile indices without rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Zero};

/// `g(beta) = max(0, beta - epsilon)`.
pub fn tv_g<T: Num + PartialOrd + Clone>(beta: T, epsilon: T) -> T {
    let d = beta - epsilon;
    if d > T::zero() {
        d
    } else {
        T::zero()
    }
}

/// `g^-1(tau) = min(1, tau + epsilon)`.
pub fn tv_g_inverse<T: Num + PartialOrd + Clone>(tau: T, epsilon: T) -> T {
    let s = tau + epsilon;
    if s < T::one() {
        s
    } else {
        T::one()
    }
}

/// Adjusted level `1 - delta~` for `K` calibration scores under a TV ball.
///
/// Returns `None` when the chain leaves `[0, 1]`, i.e. no finite region exists.
pub fn tv_adjusted_level<T: Num + PartialOrd + Clone + FromPrimitive>(
    k: usize,
    delta: T,
    epsilon: T,
) -> Option<T> {
    let gamma = tv_g_inverse(T::one() - delta, epsilon.clone());
    if gamma >= T::one() {
        return None;
    }
    let kk = T::from_usize(k)?;
    let b = (T::one() + T::one() / kk) * gamma;
    if b > T::one() {
        return None;
    }
    Some(tv_g_inverse(tv_g(b, epsilon.clone()), epsilon))
}

/// Exact rational from a decimal string such as `"0.05"` or `"1/8"`.
pub fn rational(text: &str) -> Option<BigRational> {
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, text),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = digits.parse().ok()?;
    let d = num_traits::pow(BigInt::from(10u8), frac.len());
    let r = BigRational::new(n, d);
    Some(if neg { -r } else { r })
}

/// One-based order statistic index `ceil(K (1 - delta~))` in exact arithmetic.
pub fn tv_quantile_index(k: usize, delta: &BigRational, epsilon: &BigRational) -> Option<usize> {
    let level = tv_adjusted_level(k, delta.clone(), epsilon.clone())?;
    let idx = (level * BigRational::from_integer(BigInt::from(k))).ceil();
    let idx: usize = idx.to_integer().try_into().ok()?;
    Some(idx.max(1))
}

/// Smallest `K` with a finite region, exactly; `None` if no `K` suffices.
pub fn tv_min_calibration_size(delta: &BigRational, epsilon: &BigRational) -> Option<usize> {
    let gamma = tv_g_inverse(BigRational::one() - delta, epsilon.clone());
    if gamma >= BigRational::one() {
        return None;
    }
    let k = (gamma.clone() / (BigRational::one() - gamma)).ceil();
    let k: usize = k.to_integer().try_into().ok()?;
    Some(k.max(1))
}
