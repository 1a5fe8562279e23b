//! Boolean, robust and probabilistic robust semantics.
//!
//! Evaluation computes the value signal of each subformula over the range of
//! times its parent needs, bottom-up. Until and release follow the discrete
//! definitions with the open interior interval `(tau, tau'')`.

use thiserror::Error;

use super::bounds::PredicateBoundMap;
use super::formula::Formula;
use super::predicate::Predicate;
use super::trajectory::Trajectory;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("trajectory too short: needs states up to time {needed}, last available is {available}")]
    TooShort { needed: usize, available: usize },
    #[error("formula reads state dimension {required} but trajectory has {found}")]
    Dimension { required: usize, found: usize },
    #[error("no bound for predicate '{name}' at time {time}")]
    MissingBound { name: String, time: usize },
    #[error("formula is not in positive normal form")]
    NotPnf,
    #[error("bound map observes up to time {bounds}, prefix observes up to {prefix}")]
    PrefixMismatch { bounds: usize, prefix: usize },
}

/// Supplies the robustness value of a predicate at a time.
pub trait AtomSource<T> {
    fn atom(&self, p: &Predicate<T>, time: usize) -> Result<T, EvalError>;
}

struct FullTrajectory<'a, T>(&'a Trajectory<T>);

impl<T: Scalar> AtomSource<T> for FullTrajectory<'_, T> {
    #[inline]
    fn atom(&self, p: &Predicate<T>, time: usize) -> Result<T, EvalError> {
        Ok(p.eval(self.0.state(time)))
    }
}

/// Observed prefix up to `t`, predicate bounds afterwards.
struct PrefixWithBounds<'a, T> {
    prefix: &'a Trajectory<T>,
    bounds: &'a PredicateBoundMap<T>,
}

impl<T: Scalar> AtomSource<T> for PrefixWithBounds<'_, T> {
    fn atom(&self, p: &Predicate<T>, time: usize) -> Result<T, EvalError> {
        if time <= self.bounds.observed_until() {
            Ok(p.eval(self.prefix.state(time)))
        } else {
            self.bounds
                .get(p.name(), time)
                .ok_or_else(|| EvalError::MissingBound {
                    name: p.name().to_string(),
                    time,
                })
        }
    }
}

/// Robustness values of `f` at times `from..=to`.
pub fn robustness_signal<T: Scalar, S: AtomSource<T>>(
    f: &Formula<T>,
    from: usize,
    to: usize,
    src: &S,
) -> Result<Vec<T>, EvalError> {
    let n = to - from + 1;
    Ok(match f {
        Formula::True => vec![T::infinity(); n],
        Formula::False => vec![T::neg_infinity(); n],
        Formula::Atom(p) => (from..=to)
            .map(|tau| src.atom(p, tau))
            .collect::<Result<_, _>>()?,
        Formula::Not(g) => robustness_signal(g, from, to, src)?
            .into_iter()
            .map(|v| -v)
            .collect(),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let sa = robustness_signal(a, from, to, src)?;
            let sb = robustness_signal(b, from, to, src)?;
            let and = matches!(f, Formula::And(..));
            sa.into_iter()
                .zip(sb)
                .map(|(x, y)| if and { x.min(y) } else { x.max(y) })
                .collect()
        }
        Formula::Eventually(i, g) | Formula::Always(i, g) => {
            let sg = robustness_signal(g, from + i.lo(), to + i.hi(), src)?;
            let width = i.hi() - i.lo() + 1;
            let ev = matches!(f, Formula::Eventually(..));
            (0..n)
                .map(|k| {
                    let w = &sg[k..k + width];
                    if ev {
                        w.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
                    } else {
                        w.iter().fold(T::infinity(), |m, &v| m.min(v))
                    }
                })
                .collect()
        }
        Formula::Until(a, i, b) | Formula::Release(a, i, b) => {
            let until = matches!(f, Formula::Until(..));
            let sb = robustness_signal(b, from + i.lo(), to + i.hi(), src)?;
            // left operand at times from+1 ..= to+hi, read only strictly inside (tau, tau'')
            let sa = if i.hi() >= 1 {
                robustness_signal(a, from + 1, to + i.hi(), src)?
            } else {
                Vec::new()
            };
            (0..n)
                .map(|k| {
                    let tau = from + k;
                    let (mut acc, mut run) = if until {
                        (T::neg_infinity(), T::infinity())
                    } else {
                        (T::infinity(), T::neg_infinity())
                    };
                    for off in 0..=i.hi() {
                        if off >= i.lo() {
                            let rb = sb[tau + off - (from + i.lo())];
                            acc = if until {
                                acc.max(rb.min(run))
                            } else {
                                acc.min(rb.max(run))
                            };
                        }
                        if off >= 1 && off < i.hi() {
                            let ra = sa[tau + off - (from + 1)];
                            run = if until { run.min(ra) } else { run.max(ra) };
                        }
                    }
                    acc
                })
                .collect()
        }
    })
}

/// Boolean satisfaction of `f` at times `from..=to` on a full trajectory.
pub fn boolean_signal<T: Scalar>(
    f: &Formula<T>,
    x: &Trajectory<T>,
    from: usize,
    to: usize,
) -> Vec<bool> {
    let n = to - from + 1;
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(p) => (from..=to)
            .map(|tau| p.eval(x.state(tau)) >= T::zero())
            .collect(),
        Formula::Not(g) => boolean_signal(g, x, from, to)
            .into_iter()
            .map(|v| !v)
            .collect(),
        Formula::And(a, b) => boolean_signal(a, x, from, to)
            .into_iter()
            .zip(boolean_signal(b, x, from, to))
            .map(|(p, q)| p && q)
            .collect(),
        Formula::Or(a, b) => boolean_signal(a, x, from, to)
            .into_iter()
            .zip(boolean_signal(b, x, from, to))
            .map(|(p, q)| p || q)
            .collect(),
        Formula::Eventually(i, g) | Formula::Always(i, g) => {
            let sg = boolean_signal(g, x, from + i.lo(), to + i.hi());
            let width = i.hi() - i.lo() + 1;
            let ev = matches!(f, Formula::Eventually(..));
            (0..n)
                .map(|k| {
                    let w = &sg[k..k + width];
                    if ev {
                        w.iter().any(|&v| v)
                    } else {
                        w.iter().all(|&v| v)
                    }
                })
                .collect()
        }
        Formula::Until(a, i, b) => {
            let sb = boolean_signal(b, x, from + i.lo(), to + i.hi());
            let sa = boolean_signal(a, x, from, to + i.hi());
            (0..n)
                .map(|k| {
                    let tau = from + k;
                    (tau + i.lo()..=tau + i.hi()).any(|t2| {
                        sb[t2 - from - i.lo()] && (tau + 1..t2).all(|t1| sa[t1 - from])
                    })
                })
                .collect()
        }
        Formula::Release(a, i, b) => {
            // not((not a) U (not b))
            let sb = boolean_signal(b, x, from + i.lo(), to + i.hi());
            let sa = boolean_signal(a, x, from, to + i.hi());
            (0..n)
                .map(|k| {
                    let tau = from + k;
                    (tau + i.lo()..=tau + i.hi()).all(|t2| {
                        sb[t2 - from - i.lo()] || (tau + 1..t2).any(|t1| sa[t1 - from])
                    })
                })
                .collect()
        }
    }
}

fn check_trajectory<T: Scalar>(
    phi: &Formula<T>,
    x: &Trajectory<T>,
    tau0: usize,
) -> Result<(), EvalError> {
    let needed = tau0 + phi.length();
    if needed > x.last_time() {
        return Err(EvalError::TooShort {
            needed,
            available: x.last_time(),
        });
    }
    let required = phi.required_dim();
    if required > x.dim() {
        return Err(EvalError::Dimension {
            required,
            found: x.dim(),
        });
    }
    Ok(())
}

/// Robust semantics `rho^phi(x, tau0)`.
pub fn eval_robustness<T: Scalar>(
    phi: &Formula<T>,
    x: &Trajectory<T>,
    tau0: usize,
) -> Result<T, EvalError> {
    check_trajectory(phi, x, tau0)?;
    Ok(robustness_signal(phi, tau0, tau0, &FullTrajectory(x))?[0])
}

/// Boolean semantics `(x, tau0) |= phi`; a predicate holds when `h >= 0`.
pub fn eval_boolean<T: Scalar>(
    phi: &Formula<T>,
    x: &Trajectory<T>,
    tau0: usize,
) -> Result<bool, EvalError> {
    check_trajectory(phi, x, tau0)?;
    Ok(boolean_signal(phi, x, tau0, tau0)[0])
}

/// Probabilistic robust semantics: predicate leaves read `h(X_tau)` for
/// `tau <= t` and the supplied lower bound afterwards.
pub fn eval_probabilistic_robustness<T: Scalar>(
    phi_pnf: &Formula<T>,
    observed: &Trajectory<T>,
    bounds: &PredicateBoundMap<T>,
    tau0: usize,
) -> Result<T, EvalError> {
    if !phi_pnf.is_pnf() {
        return Err(EvalError::NotPnf);
    }
    if observed.last_time() != bounds.observed_until() {
        return Err(EvalError::PrefixMismatch {
            bounds: bounds.observed_until(),
            prefix: observed.last_time(),
        });
    }
    let needed = tau0 + phi_pnf.length();
    if needed > bounds.window_end() {
        return Err(EvalError::TooShort {
            needed,
            available: bounds.window_end(),
        });
    }
    let required = phi_pnf.required_dim();
    if required > observed.dim() {
        return Err(EvalError::Dimension {
            required,
            found: observed.dim(),
        });
    }
    let src = PrefixWithBounds {
        prefix: observed,
        bounds,
    };
    Ok(robustness_signal(phi_pnf, tau0, tau0, &src)?[0])
}
