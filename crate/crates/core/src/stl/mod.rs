//! Bounded signal temporal logic over discrete-time trajectories.

mod bounds;
mod eval;
mod formula;
mod parser;
mod predicate;
mod trajectory;

pub use bounds::PredicateBoundMap;
pub use eval::{
    boolean_signal, eval_boolean, eval_probabilistic_robustness, eval_robustness,
    robustness_signal, AtomSource, EvalError,
};
pub use formula::{Formula, Interval, IntervalError};
pub use parser::{parse_formula, ParseError};
pub use predicate::{Predicate, PredicateError, PredicateKind};
pub use trajectory::{Trajectory, TrajectoryError};

use crate::scalar::Scalar;

/// Formula length `L^phi`.
pub fn formula_length<T: Scalar>(phi: &Formula<T>) -> usize {
    phi.length()
}

/// Positive normal form of `phi`.
pub fn to_positive_normal_form<T: Scalar>(phi: &Formula<T>) -> Formula<T> {
    phi.to_pnf()
}

impl<T: Scalar> Formula<T> {
    pub fn parse(text: &str, dim: usize) -> Result<Self, ParseError> {
        parse_formula(text, dim)
    }
}
