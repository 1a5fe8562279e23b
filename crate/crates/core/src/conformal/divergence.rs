use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::exact::{tv_g, tv_g_inverse};
use crate::scalar::Scalar;

/// Absolute tolerance of the bisection solvers for `g` and `g^-1`.
pub const SOLVER_TOLERANCE: f64 = 1e-9;
/// Iteration cap of the bisection solvers.
pub const SOLVER_MAX_ITER: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("shift bound epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("f(1) = {0}, but an f-divergence generator needs f(1) = 0")]
    NotNormalized(f64),
    #[error("generator fails midpoint convexity between {a} and {b}")]
    NotConvex { a: f64, b: f64 },
}

type Generator<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// An f-divergence ball `D_f(R, R0) <= epsilon` around the calibration law.
///
/// Total variation has closed forms for `g` and `g^-1`; any other convex
/// generator `f` with `f(1) = 0` is handled by bisection.
#[derive(Clone)]
pub enum FDivergence<T> {
    TotalVariation {
        epsilon: T,
    },
    Generic {
        name: String,
        f: Generator<T>,
        epsilon: T,
        /// `lim f(u)/u` as `u -> inf`, used for the perspective at zero weight.
        recession: T,
    },
}

impl<T: Scalar> fmt::Debug for FDivergence<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TotalVariation { epsilon } => f
                .debug_struct("TotalVariation")
                .field("epsilon", epsilon)
                .finish(),
            Self::Generic { name, epsilon, .. } => f
                .debug_struct("Generic")
                .field("name", name)
                .field("epsilon", epsilon)
                .finish(),
        }
    }
}

fn check_epsilon<T: Scalar>(epsilon: T) -> Result<(), DivergenceError> {
    if !(epsilon.is_finite() && epsilon >= T::zero()) {
        return Err(DivergenceError::InvalidEpsilon(epsilon.to_f64_lossy()));
    }
    Ok(())
}

impl<T: Scalar> FDivergence<T> {
    pub fn total_variation(epsilon: T) -> Result<Self, DivergenceError> {
        check_epsilon(epsilon)?;
        Ok(Self::TotalVariation { epsilon })
    }

    /// A divergence given by a black-box generator `f`.
    ///
    /// `f(1) = 0` is checked, and convexity is spot-checked for midpoints on
    /// a grid over `[0, 10]`.
    pub fn generic<F>(name: impl Into<String>, f: F, epsilon: T) -> Result<Self, DivergenceError>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        check_epsilon(epsilon)?;
        let at_one = f(T::one());
        if at_one.abs() > T::lit(1e-9) {
            return Err(DivergenceError::NotNormalized(at_one.to_f64_lossy()));
        }
        let step = T::lit(0.05);
        let grid: Vec<T> = (0..=200).map(|i| T::from_count(i) * step).collect();
        for half in [1usize, 2, 4, 8, 16, 32, 64] {
            for i in 0..grid.len().saturating_sub(2 * half) {
                let (a, m, b) = (grid[i], grid[i + half], grid[i + 2 * half]);
                let (fa, fm, fb) = (f(a), f(m), f(b));
                if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
                    continue;
                }
                let slack = T::lit(1e-9) * T::one().max(fa.abs()).max(fb.abs());
                if fm > (fa + fb) / T::lit(2.0) + slack {
                    return Err(DivergenceError::NotConvex {
                        a: a.to_f64_lossy(),
                        b: b.to_f64_lossy(),
                    });
                }
            }
        }
        let recession = Self::recession_slope(&f);
        Ok(Self::Generic {
            name: name.into(),
            f: Arc::new(f),
            epsilon,
            recession,
        })
    }

    fn recession_slope(f: &dyn Fn(T) -> T) -> T {
        let u1 = T::lit(1e6);
        let u2 = T::lit(1e9);
        let (s1, s2) = (f(u1) / u1, f(u2) / u2);
        if !s2.is_finite() || (s2 - s1) > T::lit(1e-3) * T::one().max(s1.abs()) {
            T::infinity()
        } else {
            s2
        }
    }

    /// Total variation written as a generic generator `f(z) = |z - 1| / 2`;
    /// solves by bisection rather than the closed form.
    pub fn total_variation_generic(epsilon: T) -> Result<Self, DivergenceError> {
        Self::generic("tv", |z: T| (z - T::one()).abs() / T::lit(2.0), epsilon)
    }

    /// Kullback-Leibler, `f(z) = z ln z`.
    pub fn kullback_leibler(epsilon: T) -> Result<Self, DivergenceError> {
        Self::generic(
            "kl",
            |z: T| {
                if z <= T::zero() {
                    T::zero()
                } else {
                    z * z.ln()
                }
            },
            epsilon,
        )
    }

    /// Pearson chi-squared, `f(z) = (z - 1)^2`.
    pub fn chi_squared(epsilon: T) -> Result<Self, DivergenceError> {
        Self::generic(
            "chi2",
            |z: T| {
                let d = z - T::one();
                d * d
            },
            epsilon,
        )
    }

    pub fn epsilon(&self) -> T {
        match self {
            Self::TotalVariation { epsilon } | Self::Generic { epsilon, .. } => *epsilon,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::TotalVariation { .. } => "total-variation",
            Self::Generic { name, .. } => name,
        }
    }

    /// Same divergence family with a different radius.
    #[must_use]
    pub fn with_epsilon(&self, epsilon: T) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::TotalVariation { epsilon: e } | Self::Generic { epsilon: e, .. } => *e = epsilon,
        }
        out
    }

    /// Perspective `w f(y / w)`, extended to `w = 0` by the recession slope.
    fn perspective(f: &dyn Fn(T) -> T, recession: T, w: T, y: T) -> T {
        if w > T::zero() {
            w * f(y / w)
        } else if y > T::zero() {
            y * recession
        } else {
            T::zero()
        }
    }

    /// `D_f(Bernoulli(z) || Bernoulli(beta))`.
    fn bernoulli_divergence(f: &dyn Fn(T) -> T, recession: T, beta: T, z: T) -> T {
        Self::perspective(f, recession, beta, z)
            + Self::perspective(f, recession, T::one() - beta, T::one() - z)
    }

    /// `g(beta) = inf { z in [0,1] : D_f(Bern(z) || Bern(beta)) <= epsilon }`.
    pub fn g(&self, beta: T) -> T {
        let beta = beta.max(T::zero()).min(T::one());
        match self {
            Self::TotalVariation { epsilon } => tv_g(beta, *epsilon),
            Self::Generic {
                f,
                epsilon,
                recession,
                ..
            } => {
                if epsilon.is_zero() || beta.is_zero() {
                    return beta;
                }
                let d = |z: T| Self::bernoulli_divergence(f.as_ref(), *recession, beta, z);
                if d(T::zero()) <= *epsilon {
                    return T::zero();
                }
                // d is convex in z with d(beta) = 0: bracket [infeasible, feasible]
                let (mut lo, mut hi) = (T::zero(), beta);
                let tol = T::lit(SOLVER_TOLERANCE);
                for _ in 0..SOLVER_MAX_ITER {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = (lo + hi) / T::lit(2.0);
                    if d(mid) <= *epsilon {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// `g^-1(tau) = sup { beta in [0,1] : g(beta) <= tau }`, using that `g`
    /// is nondecreasing.
    pub fn g_inverse(&self, tau: T) -> T {
        let tau = tau.max(T::zero());
        if tau >= T::one() {
            return T::one();
        }
        match self {
            Self::TotalVariation { epsilon } => tv_g_inverse(tau, *epsilon),
            Self::Generic { epsilon, .. } => {
                if epsilon.is_zero() {
                    return tau;
                }
                if self.g(T::one()) <= tau {
                    return T::one();
                }
                // g(beta) <= beta, so beta = tau is feasible
                let (mut lo, mut hi) = (tau, T::one());
                let tol = T::lit(SOLVER_TOLERANCE);
                for _ in 0..SOLVER_MAX_ITER {
                    if hi - lo <= tol {
                        break;
                    }
                    let mid = (lo + hi) / T::lit(2.0);
                    if self.g(mid) <= tau {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }
}
