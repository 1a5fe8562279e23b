use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::predicate::{Predicate, PredicateKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("interval lower bound {lo} exceeds upper bound {hi}")]
pub struct IntervalError {
    pub lo: usize,
    pub hi: usize,
}

/// Closed integer time interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    lo: usize,
    hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Result<Self, IntervalError> {
        if lo > hi {
            return Err(IntervalError { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Bounded STL formula.
///
/// `False` and `Release` only arise from [`Formula::to_pnf`]; the parser never
/// produces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula<T> {
    True,
    False,
    Atom(Predicate<T>),
    Not(Box<Formula<T>>),
    And(Box<Formula<T>>, Box<Formula<T>>),
    Or(Box<Formula<T>>, Box<Formula<T>>),
    Until(Box<Formula<T>>, Interval, Box<Formula<T>>),
    Release(Box<Formula<T>>, Interval, Box<Formula<T>>),
    Eventually(Interval, Box<Formula<T>>),
    Always(Interval, Box<Formula<T>>),
}

impl<T: Scalar> Formula<T> {
    pub fn atom(p: Predicate<T>) -> Self {
        Self::Atom(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Self) -> Self {
        Self::Not(Box::new(f))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Self::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Self::Or(Box::new(a), Box::new(b))
    }

    pub fn until(a: Self, i: Interval, b: Self) -> Self {
        Self::Until(Box::new(a), i, Box::new(b))
    }

    pub fn release(a: Self, i: Interval, b: Self) -> Self {
        Self::Release(Box::new(a), i, Box::new(b))
    }

    pub fn eventually(i: Interval, f: Self) -> Self {
        Self::Eventually(i, Box::new(f))
    }

    pub fn always(i: Interval, f: Self) -> Self {
        Self::Always(i, Box::new(f))
    }

    /// Formula length `L`: states `x_tau0 ..= x_{tau0 + L}` decide satisfaction.
    pub fn length(&self) -> usize {
        match self {
            Self::True | Self::False | Self::Atom(_) => 0,
            Self::Not(f) => f.length(),
            Self::And(a, b) | Self::Or(a, b) => a.length().max(b.length()),
            Self::Until(a, i, b) | Self::Release(a, i, b) => i.hi + a.length().max(b.length()),
            Self::Eventually(i, f) | Self::Always(i, f) => i.hi + f.length(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::True | Self::False | Self::Atom(_) => 0,
            Self::Not(f) | Self::Eventually(_, f) | Self::Always(_, f) => 1 + f.depth(),
            Self::And(a, b) | Self::Or(a, b) | Self::Until(a, _, b) | Self::Release(a, _, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// True when the formula contains no negation.
    pub fn is_pnf(&self) -> bool {
        match self {
            Self::True | Self::False | Self::Atom(_) => true,
            Self::Not(_) => false,
            Self::Eventually(_, f) | Self::Always(_, f) => f.is_pnf(),
            Self::And(a, b) | Self::Or(a, b) | Self::Until(a, _, b) | Self::Release(a, _, b) => {
                a.is_pnf() && b.is_pnf()
            }
        }
    }

    /// Rewrites into positive normal form by pushing negations to the leaves.
    ///
    /// Negated atoms become predicates for `-h`; negated until becomes release.
    pub fn to_pnf(&self) -> Self {
        self.push_negation(false)
    }

    fn push_negation(&self, neg: bool) -> Self {
        match (self, neg) {
            (Self::True, false) | (Self::False, true) => Self::True,
            (Self::True, true) | (Self::False, false) => Self::False,
            (Self::Atom(p), false) => Self::Atom(p.clone()),
            (Self::Atom(p), true) => Self::Atom(p.negated()),
            (Self::Not(f), _) => f.push_negation(!neg),
            (Self::And(a, b), false) => Self::and(a.push_negation(false), b.push_negation(false)),
            (Self::And(a, b), true) => Self::or(a.push_negation(true), b.push_negation(true)),
            (Self::Or(a, b), false) => Self::or(a.push_negation(false), b.push_negation(false)),
            (Self::Or(a, b), true) => Self::and(a.push_negation(true), b.push_negation(true)),
            (Self::Until(a, i, b), false) => {
                Self::until(a.push_negation(false), *i, b.push_negation(false))
            }
            (Self::Until(a, i, b), true) => {
                Self::release(a.push_negation(true), *i, b.push_negation(true))
            }
            (Self::Release(a, i, b), false) => {
                Self::release(a.push_negation(false), *i, b.push_negation(false))
            }
            (Self::Release(a, i, b), true) => {
                Self::until(a.push_negation(true), *i, b.push_negation(true))
            }
            (Self::Eventually(i, f), false) => Self::eventually(*i, f.push_negation(false)),
            (Self::Eventually(i, f), true) => Self::always(*i, f.push_negation(true)),
            (Self::Always(i, f), false) => Self::always(*i, f.push_negation(false)),
            (Self::Always(i, f), true) => Self::eventually(*i, f.push_negation(true)),
        }
    }

    fn visit_atoms<'a>(&'a self, out: &mut Vec<&'a Predicate<T>>) {
        match self {
            Self::True | Self::False => {}
            Self::Atom(p) => out.push(p),
            Self::Not(f) | Self::Eventually(_, f) | Self::Always(_, f) => f.visit_atoms(out),
            Self::And(a, b) | Self::Or(a, b) | Self::Until(a, _, b) | Self::Release(a, _, b) => {
                a.visit_atoms(out);
                b.visit_atoms(out);
            }
        }
    }

    /// Distinct predicates keyed by name, in name order.
    pub fn predicates(&self) -> BTreeMap<&str, &Predicate<T>> {
        let mut all = Vec::new();
        self.visit_atoms(&mut all);
        all.into_iter().map(|p| (p.name(), p)).collect()
    }

    /// Largest state dimension any predicate touches.
    pub fn required_dim(&self) -> usize {
        self.predicates()
            .values()
            .map(|p| p.required_dim())
            .max()
            .unwrap_or(0)
    }

    /// Time windows `[first, last]` at which each predicate is read when the
    /// formula is evaluated at `tau0`.
    ///
    /// These match exactly the requests issued by the evaluator, so a bound
    /// map covering them never misses an entry.
    pub fn read_windows(&self, tau0: usize) -> BTreeMap<String, (usize, usize)> {
        let mut out = BTreeMap::new();
        self.collect_windows(tau0, tau0, &mut out);
        out
    }

    fn collect_windows(&self, lo: usize, hi: usize, out: &mut BTreeMap<String, (usize, usize)>) {
        match self {
            Self::True | Self::False => {}
            Self::Atom(p) => {
                let e = out.entry(p.name().to_string()).or_insert((lo, hi));
                e.0 = e.0.min(lo);
                e.1 = e.1.max(hi);
            }
            Self::Not(f) => f.collect_windows(lo, hi, out),
            Self::And(a, b) | Self::Or(a, b) => {
                a.collect_windows(lo, hi, out);
                b.collect_windows(lo, hi, out);
            }
            Self::Eventually(i, f) | Self::Always(i, f) => {
                f.collect_windows(lo + i.lo, hi + i.hi, out)
            }
            Self::Until(a, i, b) | Self::Release(a, i, b) => {
                if i.hi >= 1 {
                    a.collect_windows(lo + 1, hi + i.hi, out);
                }
                b.collect_windows(lo + i.lo, hi + i.hi, out);
            }
        }
    }

    fn is_simple(&self) -> bool {
        matches!(
            self,
            Self::True
                | Self::False
                | Self::Atom(_)
                | Self::Not(_)
                | Self::Eventually(..)
                | Self::Always(..)
        )
    }
}

struct Wrapped<'a, T>(&'a Formula<T>);

impl<T: Scalar> fmt::Display for Wrapped<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_simple() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "({})", self.0)
        }
    }
}

fn write_atom<T: Scalar>(f: &mut fmt::Formatter<'_>, p: &Predicate<T>) -> fmt::Result {
    match p.kind() {
        PredicateKind::Affine { coeffs, offset } => {
            f.write_str("(")?;
            let mut first = true;
            for (i, &c) in coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let mag = c.abs();
                match (first, c < T::zero()) {
                    (true, false) => {}
                    (true, true) => f.write_str("-")?,
                    (false, false) => f.write_str(" + ")?,
                    (false, true) => f.write_str(" - ")?,
                }
                if mag == T::one() {
                    write!(f, "x{i}")?;
                } else {
                    write!(f, "{mag}*x{i}")?;
                }
                first = false;
            }
            write!(f, " >= {})", -*offset)
        }
        PredicateKind::NormInside {
            selector,
            center,
            threshold,
        }
        | PredicateKind::NormOutside {
            selector,
            center,
            threshold,
        } => {
            let vars: Vec<String> = selector.iter().map(|i| format!("x{i}")).collect();
            let ctr: Vec<String> = center.iter().map(|c| c.to_string()).collect();
            let op = if matches!(p.kind(), PredicateKind::NormInside { .. }) {
                "<="
            } else {
                ">="
            };
            write!(
                f,
                "(norm2({} ; {}) {op} {threshold})",
                vars.join(", "),
                ctr.join(", ")
            )
        }
    }
}

/// Pretty-prints in the textual formula grammar.
///
/// `False` prints as `!TRUE` and release through its until dual, so every
/// printed formula re-parses to an equivalent one.
impl<T: Scalar> fmt::Display for Formula<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::True => f.write_str("TRUE"),
            Self::False => f.write_str("!TRUE"),
            Self::Atom(p) => write_atom(f, p),
            Self::Not(g) => write!(f, "!{}", Wrapped(g.as_ref())),
            Self::And(a, b) => write!(f, "{} & {}", Wrapped(a.as_ref()), Wrapped(b.as_ref())),
            Self::Or(a, b) => write!(f, "{} | {}", Wrapped(a.as_ref()), Wrapped(b.as_ref())),
            Self::Until(a, i, b) => {
                write!(f, "{} U{i} {}", Wrapped(a.as_ref()), Wrapped(b.as_ref()))
            }
            Self::Release(a, i, b) => write!(
                f,
                "!((!{}) U{i} (!{}))",
                Wrapped(a.as_ref()),
                Wrapped(b.as_ref())
            ),
            Self::Eventually(i, g) => write!(f, "F{i} {}", Wrapped(g.as_ref())),
            Self::Always(i, g) => write!(f, "G{i} {}", Wrapped(g.as_ref())),
        }
    }
}
