//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rprv::stl::{Formula, Interval, Predicate, Trajectory};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_predicate<R: Rng>(rng: &mut R, name: String, dim: usize) -> Predicate<f64> {
    match rng.gen_range(0..4) {
        0 | 1 => {
            let mut coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if coeffs.iter().all(|c| *c == 0.0) {
                coeffs[0] = 1.0;
            }
            Predicate::affine(name, coeffs, rng.gen_range(-2.0..2.0)).unwrap()
        }
        k => {
            let mut selector: Vec<usize> = (0..dim).filter(|_| rng.gen_bool(0.6)).collect();
            if selector.is_empty() {
                selector.push(rng.gen_range(0..dim));
            }
            let center = selector.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c = rng.gen_range(0.0..2.0);
            if k == 2 {
                Predicate::norm_inside(name, selector, center, c).unwrap()
            } else {
                Predicate::norm_outside(name, selector, center, c).unwrap()
            }
        }
    }
}

fn interval<R: Rng>(rng: &mut R) -> Interval {
    let lo = rng.gen_range(0..=2);
    Interval::new(lo, lo + rng.gen_range(0..=2)).unwrap()
}

/// Random formula of depth at most `depth` over all user-facing operators
/// plus `Release`.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, dim: usize, next: &mut usize) -> Formula<f64> {
    if depth == 0 || rng.gen_bool(0.25) {
        if rng.gen_bool(0.05) {
            return Formula::True;
        }
        *next += 1;
        return Formula::atom(random_predicate(rng, format!("q{next}"), dim));
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0 => Formula::not(random_formula(rng, d, dim, next)),
        1 => Formula::and(random_formula(rng, d, dim, next), random_formula(rng, d, dim, next)),
        2 => Formula::or(random_formula(rng, d, dim, next), random_formula(rng, d, dim, next)),
        3 => {
            let a = random_formula(rng, d, dim, next);
            let i = interval(rng);
            Formula::until(a, i, random_formula(rng, d, dim, next))
        }
        4 => {
            let a = random_formula(rng, d, dim, next);
            let i = interval(rng);
            Formula::release(a, i, random_formula(rng, d, dim, next))
        }
        5 => {
            let i = interval(rng);
            Formula::eventually(i, random_formula(rng, d, dim, next))
        }
        _ => {
            let i = interval(rng);
            Formula::always(i, random_formula(rng, d, dim, next))
        }
    }
}

/// Random formula with `length() <= max_len`.
pub fn bounded_formula<R: Rng>(rng: &mut R, depth: usize, dim: usize, max_len: usize) -> Formula<f64> {
    loop {
        let f = random_formula(rng, depth, dim, &mut 0);
        if f.length() <= max_len {
            return f;
        }
    }
}

/// Random trajectory; with `ties` the values are small integers so that
/// predicates frequently evaluate to equal values.
pub fn random_trajectory<R: Rng>(rng: &mut R, len: usize, dim: usize, ties: bool) -> Trajectory<f64> {
    let data = (0..len * dim)
        .map(|_| {
            if ties {
                f64::from(rng.gen_range(-2i32..=2))
            } else {
                rng.gen_range(-3.0..3.0)
            }
        })
        .collect();
    Trajectory::from_flat(dim, data).unwrap()
}

/// Robustness straight from the recursive definition, one time point at a
/// time, with no shared signals.
pub fn oracle_robustness(f: &Formula<f64>, x: &Trajectory<f64>, tau: usize) -> f64 {
    match f {
        Formula::True => f64::INFINITY,
        Formula::False => f64::NEG_INFINITY,
        Formula::Atom(p) => p.eval(x.state(tau)),
        Formula::Not(a) => -oracle_robustness(a, x, tau),
        Formula::And(a, b) => oracle_robustness(a, x, tau).min(oracle_robustness(b, x, tau)),
        Formula::Or(a, b) => oracle_robustness(a, x, tau).max(oracle_robustness(b, x, tau)),
        Formula::Until(a, i, b) => until(a, *i, b, x, tau),
        Formula::Release(a, i, b) => {
            let dual = Formula::until(Formula::not((**a).clone()), *i, Formula::not((**b).clone()));
            -oracle_robustness(&dual, x, tau)
        }
        Formula::Eventually(i, a) => until(&Formula::True, *i, a, x, tau),
        Formula::Always(i, a) => {
            let inner = Formula::not((**a).clone());
            -until(&Formula::True, *i, &inner, x, tau)
        }
    }
}

fn until(a: &Formula<f64>, i: Interval, b: &Formula<f64>, x: &Trajectory<f64>, tau: usize) -> f64 {
    let mut sup = f64::NEG_INFINITY;
    for t2 in tau + i.lo()..=tau + i.hi() {
        let mut m = oracle_robustness(b, x, t2);
        for t1 in tau + 1..t2 {
            m = m.min(oracle_robustness(a, x, t1));
        }
        sup = sup.max(m);
    }
    sup
}

/// Boolean satisfaction straight from the recursive definition.
pub fn oracle_boolean(f: &Formula<f64>, x: &Trajectory<f64>, tau: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(p) => p.eval(x.state(tau)) >= 0.0,
        Formula::Not(a) => !oracle_boolean(a, x, tau),
        Formula::And(a, b) => oracle_boolean(a, x, tau) && oracle_boolean(b, x, tau),
        Formula::Or(a, b) => oracle_boolean(a, x, tau) || oracle_boolean(b, x, tau),
        Formula::Until(a, i, b) => (tau + i.lo()..=tau + i.hi()).any(|t2| {
            oracle_boolean(b, x, t2) && (tau + 1..t2).all(|t1| oracle_boolean(a, x, t1))
        }),
        Formula::Release(a, i, b) => (tau + i.lo()..=tau + i.hi()).all(|t2| {
            oracle_boolean(b, x, t2) || (tau + 1..t2).any(|t1| oracle_boolean(a, x, t1))
        }),
        Formula::Eventually(i, a) => (tau + i.lo()..=tau + i.hi()).any(|t| oracle_boolean(a, x, t)),
        Formula::Always(i, a) => (tau + i.lo()..=tau + i.hi()).all(|t| oracle_boolean(a, x, t)),
    }
}

/// Infimum of `h` over the ball by nested grid refinement: a coarse grid
/// over a parameter box, then repeated zooms around the best point. The
/// l-infinity ball is its own box; the l2 ball is parametrised by radius and
/// angles so that its boundary is sampled exactly. Every evaluated point
/// lies in the ball, so the result never undershoots the true infimum.
pub fn grid_ball_infimum(pred: &Predicate<f64>, center: &[f64], radius: f64, linf: bool) -> f64 {
    use std::f64::consts::PI;
    let dim = center.len();
    let (lo, hi): (Vec<f64>, Vec<f64>) = if linf || dim == 1 {
        (vec![-radius; dim], vec![radius; dim])
    } else if dim == 2 {
        (vec![0.0, 0.0], vec![radius, 2.0 * PI])
    } else {
        assert_eq!(dim, 3, "oracle supports up to three dimensions");
        (vec![0.0, 0.0, 0.0], vec![radius, 2.0 * PI, PI])
    };
    let point = |u: &[f64]| -> Vec<f64> {
        let off = if linf || dim == 1 {
            u.to_vec()
        } else if dim == 2 {
            vec![u[0] * u[1].cos(), u[0] * u[1].sin()]
        } else {
            vec![u[0] * u[2].sin() * u[1].cos(), u[0] * u[2].sin() * u[1].sin(), u[0] * u[2].cos()]
        };
        off.iter().zip(center).map(|(o, c)| c + o).collect()
    };
    let mut best_u: Vec<f64> = (0..dim).map(|k| 0.5 * (lo[k] + hi[k])).collect();
    let mut best = pred.eval(center);
    let (mut a, mut b) = (lo.clone(), hi.clone());
    let mut n = if dim == 3 { 81 } else { 161 };
    for _round in 0..8 {
        let step: Vec<f64> = (0..dim).map(|k| (b[k] - a[k]) / (n - 1) as f64).collect();
        let mut idx = vec![0usize; dim];
        loop {
            let u: Vec<f64> = (0..dim).map(|k| a[k] + step[k] * idx[k] as f64).collect();
            let v = pred.eval(&point(&u));
            if v < best {
                best = v;
                best_u = u;
            }
            let mut k = 0;
            while k < dim {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        // zoom to +-4 old steps around the incumbent, clipped to the box
        for k in 0..dim {
            a[k] = (best_u[k] - 4.0 * step[k]).max(lo[k]);
            b[k] = (best_u[k] + 4.0 * step[k]).min(hi[k]);
        }
        n = 41;
    }
    best
}
