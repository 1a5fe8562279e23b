//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

mod common;

use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::Rng;
use rprv::conformal::{
    exact, min_calibration_size, robust_quantile, vanilla_quantile, CalibrationSize, FDivergence,
    Provenance, ScoreSet,
};
use rprv::harness::{
    run_coverage_experiment, run_score_coverage, CoverageReport, ExperimentConfig, ScoreExperiment,
    ScoreLaw,
};
use rprv::rprv::{
    adaptive_rescale, predicate_ball_infimum, predicted_read_pairs, AdaptiveWeightModel, Method,
    StateNorm,
};
use rprv::shift::tv_estimate;
use rprv::stl::{eval_boolean, eval_probabilistic_robustness, eval_robustness, PredicateBoundMap, Trajectory};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scores(v: Vec<f64>) -> ScoreSet<f64> {
    ScoreSet::new(v, Provenance::External).unwrap()
}

fn tv(eps: f64) -> FDivergence<f64> {
    FDivergence::total_variation(eps).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let law = ScoreLaw::Normal { mean: 0.0, sd: 1.0 };
    let report = run_score_coverage::<f64>(&ScoreExperiment {
        calibration_law: law,
        test_law: law,
        calibration: 2000,
        tests: 100,
        trials: 50,
        delta: 0.2,
        epsilon: 0.0,
        seed: 1,
    })
    .unwrap();
    let elapsed = start.elapsed();
    let m = report.baseline_mean_coverage;
    check(
        (0.79..=1.0).contains(&m) && elapsed < Duration::from_secs(10),
        format!("vanilla coverage, i.i.d. scores: mean {m:.4} (need [0.79, 1]), {elapsed:.2?} (need < 10s)"),
    )
}

fn experiment(method: Method) -> (CoverageReport<f64>, ExperimentConfig, Duration) {
    let cfg = ExperimentConfig {
        method,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let report = run_coverage_experiment::<f64>(&cfg).unwrap();
    (report, cfg, start.elapsed())
}

fn floor_3se() -> f64 {
    0.8 - 3.0 * (0.16f64 / 5000.0).sqrt()
}

fn criterion_2(direct: &CoverageReport<f64>, elapsed: Duration) -> Outcome {
    let robust = direct.mean_coverage;
    let plain = direct.baseline_mean_coverage;
    check(
        robust >= floor_3se() && plain < robust && elapsed < Duration::from_secs(300),
        format!(
            "direct method under shift (estimated eps {:.4}): robust coverage {robust:.4} (need >= {:.4}), \
             eps=0 coverage {plain:.4} (need < robust), {elapsed:.2?} (need < 300s)",
            direct.epsilon,
            floor_3se()
        ),
    )
}

fn criterion_3(direct: &CoverageReport<f64>, v1: &CoverageReport<f64>, v2: &CoverageReport<f64>) -> Outcome {
    let floor = floor_3se();
    let ok = |r: &CoverageReport<f64>| r.mean_coverage >= floor && r.mean_rho_star <= direct.mean_rho_star;
    check(
        ok(v1) && ok(v2),
        format!(
            "indirect variants: coverage I {:.4} / II {:.4} (need >= {floor:.4}); mean rho* I {:.3} / II {:.3} \
             (need <= direct {:.3})",
            v1.mean_coverage, v2.mean_coverage, v1.mean_rho_star, v2.mean_rho_star, direct.mean_rho_star
        ),
    )
}

fn criterion_4() -> Outcome {
    let s = scores((1..=100).map(f64::from).collect());
    let q = |t: &str| exact::rational(t).unwrap();
    let r05 = robust_quantile(&s, 0.2, &tv(0.05)).unwrap();
    let r0 = robust_quantile(&s, 0.2, &tv(0.0)).unwrap();
    let s32 = ScoreSet::<f32>::new((1..=100).map(|i| i as f32).collect(), Provenance::External).unwrap();
    let r32 = robust_quantile(&s32, 0.2f32, &FDivergence::total_variation(0.05f32).unwrap()).unwrap();
    let k05 = min_calibration_size(0.2, &tv(0.05)).unwrap();
    let k0 = min_calibration_size(0.2, &tv(0.0)).unwrap();
    let k20 = min_calibration_size(0.2, &tv(0.2)).unwrap();
    let half: BigRational = q("0.2");
    let float_ok = r05.value == 86.0
        && r05.quantile_index == Some(86)
        && r0.value == 81.0
        && r0.quantile_index == Some(81)
        && r32.value == 86.0
        && k05 == CalibrationSize::Finite(6)
        && k0 == CalibrationSize::Finite(4)
        && k20 == CalibrationSize::Infeasible;
    let exact_ok = exact::tv_quantile_index(100, &half, &q("0.05")) == Some(86)
        && exact::tv_quantile_index(100, &half, &q("0")) == Some(81)
        && exact::tv_min_calibration_size(&half, &q("0.05")) == Some(6)
        && exact::tv_min_calibration_size(&half, &q("0")) == Some(4)
        && exact::tv_min_calibration_size(&half, &q("0.2")).is_none();
    check(
        float_ok && exact_ok,
        format!(
            "exact TV values: C~ {} / {} (need 86 / 81), K_min {:?} / {:?} / {:?} (need 6 / 4 / infeasible), \
             float {float_ok}, rational {exact_ok}",
            r05.value, r0.value, k05, k0, k20
        ),
    )
}

fn criterion_5() -> Outcome {
    // (a) bisection against the TV closed form
    let mut worst_a = 0.0f64;
    for eps in [0.0, 0.05, 0.1, 0.142, 0.3] {
        let closed = tv(eps);
        let generic = FDivergence::total_variation_generic(eps).unwrap();
        for i in 0..=100 {
            let b = f64::from(i) / 100.0;
            worst_a = worst_a
                .max((closed.g(b) - generic.g(b)).abs())
                .max((closed.g_inverse(b) - generic.g_inverse(b)).abs());
        }
    }

    // (b) ball infimum against nested grid search
    let mut r = rng(5);
    let mut worst_b = 0.0f64;
    for i in 0..100 {
        let dim = r.gen_range(1..=3);
        let p = random_predicate(&mut r, format!("b{i}"), dim);
        let c: Vec<f64> = (0..dim).map(|_| r.gen_range(-3.0..3.0)).collect();
        let radius = r.gen_range(0.01..3.0);
        for (norm, linf) in [(StateNorm::L2, false), (StateNorm::LInf, true)] {
            let closed = predicate_ball_infimum(&p, &c, radius, norm);
            let grid = grid_ball_infimum(&p, &c, radius, linf);
            worst_b = worst_b.max((closed - grid).abs());
        }
    }

    // (c) signal evaluation against per-time recursion
    let mut r = rng(6);
    let mut worst_c = 0.0f64;
    let mut mismatches = 0;
    for i in 0..500 {
        let phi = bounded_formula(&mut r, 4, 2, 11);
        let len = (phi.length() + 1 + r.gen_range(0..=2)).min(12);
        let x = random_trajectory(&mut r, len, 2, i % 3 == 0);
        let a = eval_robustness(&phi, &x, 0).unwrap();
        let b = oracle_robustness(&phi, &x, 0);
        if a != b {
            if a.is_finite() && b.is_finite() {
                worst_c = worst_c.max((a - b).abs());
            } else {
                mismatches += 1;
            }
        }
    }
    check(
        worst_a <= 1e-6 && worst_b <= 1e-3 && worst_c <= 1e-12 && mismatches == 0,
        format!(
            "oracles: bisection vs closed form {worst_a:.2e} (need <= 1e-6), ball infimum vs grid {worst_b:.2e} \
             (need <= 1e-3), robustness vs enumeration {worst_c:.2e} with {mismatches} infinite mismatches \
             (need <= 1e-12)"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let mut r = rng(7);

    // soundness and PNF equivalence
    let mut bad_sound = 0;
    let mut bad_pnf = 0;
    for i in 0..1000 {
        let phi = bounded_formula(&mut r, 4, 2, 11);
        let x = random_trajectory(&mut r, phi.length() + 1, 2, i % 2 == 0);
        let rho = eval_robustness(&phi, &x, 0).unwrap();
        let sat = eval_boolean(&phi, &x, 0).unwrap();
        if (rho > 0.0 && !sat) || (rho < 0.0 && sat) || sat != oracle_boolean(&phi, &x, 0) {
            bad_sound += 1;
        }
        let pnf = phi.to_pnf();
        let rho_p = eval_robustness(&pnf, &x, 0).unwrap();
        let same = rho_p == rho || (rho_p - rho).abs() <= 1e-12;
        if !pnf.is_pnf() || eval_boolean(&pnf, &x, 0).unwrap() != sat || !same {
            bad_pnf += 1;
        }
    }
    if bad_sound > 0 {
        failures.push(format!("soundness {bad_sound}"));
    }
    if bad_pnf > 0 {
        failures.push(format!("pnf {bad_pnf}"));
    }

    // epsilon monotonicity and the eps = 0 reduction
    let mut bad_mono = 0;
    let mut bad_zero = 0;
    for _ in 0..300 {
        let k = r.gen_range(1..300);
        let s = scores((0..k).map(|_| r.gen_range(-5.0..5.0)).collect());
        let delta = r.gen_range(0.01..0.6);
        for make in [
            FDivergence::total_variation as fn(f64) -> _,
            FDivergence::kullback_leibler,
            FDivergence::chi_squared,
        ] {
            let mut prev = f64::NEG_INFINITY;
            for j in 0..=30 {
                let v = robust_quantile(&s, delta, &make(f64::from(j) / 100.0).unwrap()).unwrap().value;
                if v < prev {
                    bad_mono += 1;
                }
                prev = v;
            }
        }
        let a = robust_quantile(&s, delta, &tv(0.0)).unwrap();
        let b = vanilla_quantile(&s, delta).unwrap();
        if a.value.to_bits() != b.value.to_bits() || a.feasible != b.feasible {
            bad_zero += 1;
        }
    }
    if bad_mono > 0 {
        failures.push(format!("eps monotonicity {bad_mono}"));
    }
    if bad_zero > 0 {
        failures.push(format!("eps=0 reduction {bad_zero}"));
    }

    // deterministic bounds below the truth give a lower bound
    let mut bad_bound = 0;
    let mut checked = 0;
    while checked < 500 {
        let phi = bounded_formula(&mut r, 4, 2, 11).to_pnf();
        let l = phi.length();
        if l == 0 {
            continue;
        }
        checked += 1;
        let x = random_trajectory(&mut r, l + 1, 2, false);
        let t = r.gen_range(0..l);
        let h = l - t;
        let exact_bounds = r.gen_bool(0.2);
        let mut bounds = PredicateBoundMap::new(t, h);
        for (p, times) in predicted_read_pairs(&phi, 0, t, h) {
            for tau in times {
                let slack = if exact_bounds { 0.0 } else { r.gen_range(0.0..1.0) };
                bounds.insert(p.name(), tau, p.eval(x.state(tau)) - slack);
            }
        }
        let prefix = Trajectory::from_flat(2, x.as_flat()[..(t + 1) * 2].to_vec()).unwrap();
        let lower = eval_probabilistic_robustness(&phi, &prefix, &bounds, 0).unwrap();
        let truth = eval_robustness(&phi, &x, 0).unwrap();
        if lower > truth || (exact_bounds && lower != truth) {
            bad_bound += 1;
        }
    }
    if bad_bound > 0 {
        failures.push(format!("bound soundness {bad_bound}"));
    }

    // constant adaptive weight cancels
    let mut bad_adapt = 0;
    for _ in 0..200 {
        let k = r.gen_range(5..200);
        let s = scores((0..k).map(|_| r.gen_range(-5.0..5.0)).collect());
        let omega = r.gen_range(0.01..10.0);
        let prefixes: Vec<_> = (0..k).map(|_| random_trajectory(&mut r, 1, 1, false)).collect();
        let w = AdaptiveWeightModel::constant(omega).unwrap();
        let rescaled = adaptive_rescale(&s, &w, &prefixes).unwrap();
        let div = tv(r.gen_range(0.0..0.1));
        let a = robust_quantile(&s, 0.2, &div).unwrap();
        let b = robust_quantile(&rescaled, 0.2, &div).unwrap();
        let applied = b.scaled(omega);
        let same = if a.feasible {
            (applied - a.value).abs() <= 1e-12 * a.value.abs().max(1.0)
        } else {
            applied == f64::INFINITY
        };
        if !same || a.quantile_index != b.quantile_index {
            bad_adapt += 1;
        }
    }
    if bad_adapt > 0 {
        failures.push(format!("adaptive cancellation {bad_adapt}"));
    }

    check(
        failures.is_empty(),
        if failures.is_empty() {
            "invariants: soundness, PNF equivalence, eps monotonicity, eps=0 bit equality, bound soundness, \
             constant-weight cancellation all hold"
                .to_string()
        } else {
            format!("invariants violated: {}", failures.join(", "))
        },
    )
}

fn normal_tv(shift: f64) -> f64 {
    // 0.5 * integral |phi(x) - phi(x - shift)| by Simpson's rule
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, b, n) = (-12.0, 13.0, 200_000);
    let h = (b - a) / f64::from(n);
    let f = |x: f64| (phi(x) - phi(x - shift)).abs();
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * f64::from(i));
    }
    0.5 * s * h / 3.0
}

fn criterion_7() -> Outcome {
    let mut r = rng(11);
    let normal = rand_distr::StandardNormal;
    let a: Vec<f64> = (0..10_000).map(|_| r.sample::<f64, _>(normal)).collect();
    let b: Vec<f64> = (0..10_000).map(|_| 1.0 + r.sample::<f64, _>(normal)).collect();
    let start = Instant::now();
    let est = tv_estimate(&a, &b).unwrap();
    let elapsed = start.elapsed();
    let truth = normal_tv(1.0);
    check(
        (est - 0.383).abs() <= 0.03 && (truth - 0.383).abs() < 5e-4 && elapsed < Duration::from_secs(30),
        format!(
            "TV estimate N(0,1) vs N(1,1), 1e4 samples each: {est:.4} (need 0.383 +- 0.03; exact {truth:.4}), \
             {elapsed:.2?} (need < 30s)"
        ),
    )
}

fn main() {
    let mut results = vec![criterion_1()];
    let (direct, _, t_direct) = experiment(Method::Direct);
    results.push(criterion_2(&direct, t_direct));
    let (v1, _, _) = experiment(Method::Variant1);
    let (v2, _, _) = experiment(Method::Variant2);
    results.push(criterion_3(&direct, &v1, &v2));
    results.push(criterion_4());
    results.push(criterion_5());
    results.push(criterion_6());
    results.push(criterion_7());

    let mut failed = 0;
    for (i, o) in results.iter().enumerate() {
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
