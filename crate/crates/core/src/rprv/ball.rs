//! Worst-case predicate robustness over a norm ball.

use crate::scalar::{norm1, norm2, Scalar};
use crate::stl::{Predicate, PredicateKind};

use super::StateNorm;

/// `inf { h(z) : ||z - center|| <= radius }` in closed form.
///
/// The ball lives in the full state space; for norm predicates it is
/// projected onto the selected components, which never enlarges it. An
/// infinite radius yields the global infimum (`-inf` except for
/// norm-outside predicates, whose infimum is `-threshold`).
pub fn predicate_ball_infimum<T: Scalar>(
    pred: &Predicate<T>,
    center: &[T],
    radius: T,
    norm: StateNorm,
) -> T {
    debug_assert!(radius >= T::zero(), "negative radius");
    let h = pred.eval(center);
    if radius.is_zero() {
        return h;
    }
    match (pred.kind(), norm) {
        (PredicateKind::Affine { coeffs, .. }, StateNorm::L2) => h - radius * norm2(coeffs),
        // dual of l-infinity is l1
        (PredicateKind::Affine { coeffs, .. }, StateNorm::LInf) => h - radius * norm1(coeffs),
        (
            PredicateKind::NormInside {
                selector,
                center: p,
                threshold,
            },
            _,
        ) => {
            let far = offsets(selector, p, center)
                .map(|d| match norm {
                    StateNorm::L2 => d,
                    StateNorm::LInf => d + radius,
                })
                .map(|d| d * d)
                .sum::<T>()
                .sqrt();
            match norm {
                StateNorm::L2 => *threshold - far - radius,
                StateNorm::LInf => *threshold - far,
            }
        }
        (
            PredicateKind::NormOutside {
                selector,
                center: p,
                threshold,
            },
            StateNorm::L2,
        ) => {
            let d = offsets(selector, p, center).map(|d| d * d).sum::<T>().sqrt();
            (d - radius).max(T::zero()) - *threshold
        }
        (
            PredicateKind::NormOutside {
                selector,
                center: p,
                threshold,
            },
            StateNorm::LInf,
        ) => {
            let near = offsets(selector, p, center)
                .map(|d| (d - radius).max(T::zero()))
                .map(|d| d * d)
                .sum::<T>()
                .sqrt();
            near - *threshold
        }
    }
}

/// `|x_i - p_i|` over the selected components.
fn offsets<'a, T: Scalar>(
    selector: &'a [usize],
    p: &'a [T],
    x: &'a [T],
) -> impl Iterator<Item = T> + 'a {
    selector.iter().zip(p).map(move |(&i, &c)| (x[i] - c).abs())
}
