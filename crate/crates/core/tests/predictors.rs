mod common;

use std::collections::BTreeMap;

use common::{random_trajectory, rng};
use rand::Rng;
use rprv::predictors::{fit_predictor, write_external_predictions, Model, PredictorError, PredictorKind, PredictorModel};
use rprv::stl::Trajectory;

fn traj(v: &[f64]) -> Trajectory<f64> {
    Trajectory::scalar(v.to_vec()).unwrap()
}

#[test]
fn constant_velocity_and_hold_last() {
    let cv = fit_predictor::<f64>(&[], 2, 2, &PredictorKind::ConstantVelocity).unwrap();
    assert_eq!(cv.predict(&traj(&[0.0, 1.0, 2.0])).unwrap().predicted(), &[vec![3.0], vec![4.0]]);
    let hl = fit_predictor::<f64>(&[], 2, 3, &PredictorKind::HoldLast).unwrap();
    assert_eq!(hl.predict(&traj(&[0.0, 1.0, 7.0])).unwrap().predicted(), vec![vec![7.0]; 3].as_slice());
}

#[test]
fn ar_fit_recovers_recurrence() {
    let training: Vec<_> = (1..=5)
        .map(|s| traj(&(0..20).map(|k| f64::from(s) * 0.9f64.powi(k)).collect::<Vec<_>>()))
        .collect();
    let m = fit_predictor(&training, 5, 2, &PredictorKind::Autoregressive { order: 1 }).unwrap();
    assert!(!m.fell_back());
    let Model::Autoregressive { coeffs, intercepts } = m.model() else { panic!() };
    assert!((coeffs[0][0] - 0.9).abs() < 1e-8, "{coeffs:?}");
    assert!(intercepts[0].abs() < 1e-8);

    let p = PredictorModel::autoregressive(vec![vec![0.9]], vec![0.0], 1, 2)
        .unwrap()
        .predict(&traj(&[3.0, 10.0]))
        .unwrap();
    assert!((p.predicted()[0][0] - 9.0).abs() < 1e-12);
    assert!((p.predicted()[1][0] - 8.1).abs() < 1e-12);
}

#[test]
fn ar2_per_component() {
    // x_k = 1.5 x_{k-1} - 0.6 x_{k-2} + 1 and y_k = 0.3 y_{k-1} + 0.2 y_{k-2} - 0.5
    let mut r = rng(41);
    let training: Vec<_> = (0..6)
        .map(|_| {
            let mut s: Vec<[f64; 2]> = (0..2).map(|_| [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)]).collect();
            for k in 2..17 {
                let (p, q) = (s[k - 1], s[k - 2]);
                s.push([1.5 * p[0] - 0.6 * q[0] + 1.0, 0.3 * p[1] + 0.2 * q[1] - 0.5]);
            }
            Trajectory::new(s.iter().map(|v| v.to_vec()).collect()).unwrap()
        })
        .collect();
    let m = fit_predictor(&training, 4, 3, &PredictorKind::Autoregressive { order: 2 }).unwrap();
    let Model::Autoregressive { coeffs, intercepts } = m.model() else { panic!() };
    assert!((coeffs[0][0] - 1.5).abs() < 1e-6 && (coeffs[0][1] + 0.6).abs() < 1e-6);
    assert!((intercepts[0] - 1.0).abs() < 1e-6);
    assert!((coeffs[1][0] - 0.3).abs() < 1e-6 && (coeffs[1][1] - 0.2).abs() < 1e-6);
    assert!((intercepts[1] + 0.5).abs() < 1e-6);
    // perfect multi-step prediction on a held-out series of the same law
    let x = &training[0];
    let p = m.predict_from(x).unwrap();
    for tau in 5..=7 {
        assert!((p.at(tau)[0] - x.state(tau)[0]).abs() < 1e-5);
    }
}

#[test]
fn singular_fit_falls_back() {
    let training = vec![traj(&[2.0; 10]), traj(&[2.0; 10])];
    let m = fit_predictor(&training, 4, 2, &PredictorKind::Autoregressive { order: 2 }).unwrap();
    assert!(m.fell_back());
    assert_eq!(m.predict_from(&traj(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap().predicted(), &[vec![5.0], vec![5.0]]);
}

#[test]
fn fit_errors() {
    let ar = |p| PredictorKind::Autoregressive { order: p };
    assert!(matches!(fit_predictor::<f64>(&[], 3, 1, &ar(1)), Err(PredictorError::EmptyTraining)));
    assert!(matches!(
        fit_predictor(&[traj(&[1.0; 4])], 3, 2, &ar(1)),
        Err(PredictorError::TooShort { .. })
    ));
    assert!(matches!(
        fit_predictor(&[traj(&[1.0; 10])], 3, 2, &ar(4)),
        Err(PredictorError::InvalidOrder { .. })
    ));
    assert!(matches!(
        fit_predictor(&[traj(&[1.0, 2.0, 3.0])], 2, 0, &ar(2)),
        Err(PredictorError::InsufficientData { .. })
    ));
    assert!(matches!("ar:x".parse::<PredictorKind>(), Err(PredictorError::UnknownKind(_))));
    assert_eq!("ar:3".parse::<PredictorKind>().unwrap(), PredictorKind::Autoregressive { order: 3 });
    assert_eq!(PredictorKind::Autoregressive { order: 3 }.to_string(), "ar:3");
}

#[test]
fn assembly_and_determinism() {
    let mut r = rng(42);
    let training: Vec<_> = (0..20).map(|_| random_trajectory(&mut r, 30, 2, false)).collect();
    for kind in ["hold-last", "constant-velocity", "ar:1", "ar:4"] {
        let kind: PredictorKind = kind.parse().unwrap();
        let m = fit_predictor(&training, 9, 5, &kind).unwrap();
        for x in &training[..5] {
            let a = m.predict_from(x).unwrap();
            let b = m.predict_from(x).unwrap();
            assert_eq!(a, b);
            let full = a.assembled();
            assert_eq!(full.len(), 15);
            for tau in 0..=9 {
                assert_eq!(full.state(tau), x.state(tau));
            }
        }
    }
}

#[test]
fn prefix_and_dimension_checks() {
    let m = PredictorModel::autoregressive(vec![vec![1.0]], vec![0.0], 2, 1).unwrap();
    assert!(matches!(m.predict(&traj(&[1.0, 2.0])), Err(PredictorError::PrefixLength { .. })));
    let two_d = Trajectory::new(vec![vec![1.0, 2.0]; 3]).unwrap();
    assert!(matches!(m.predict(&two_d), Err(PredictorError::Dimension { .. })));
}

#[test]
fn external_predictions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pred.json");
    let mut preds = BTreeMap::new();
    preds.insert("a".to_string(), vec![vec![0.1 + 0.2, -1e-17], vec![3.0, 4.0]]);
    preds.insert("b".to_string(), vec![vec![5.0, 6.0], vec![7.0, 8.0]]);
    write_external_predictions(&preds, &path).unwrap();
    let kind = PredictorKind::External { path: path.clone() };
    let m = fit_predictor::<f64>(&[], 1, 2, &kind).unwrap();
    let x = Trajectory::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let p = m.predict(&x.clone().with_id("a")).unwrap();
    assert_eq!(p.predicted(), preds["a"].as_slice());
    assert!(matches!(m.predict(&x.clone().with_id("zzz")), Err(PredictorError::UnknownId(_))));
    assert!(matches!(m.predict(&x), Err(PredictorError::MissingId)));
    assert!(matches!(
        fit_predictor::<f64>(&[], 1, 3, &kind),
        Err(PredictorError::WrongHorizon { .. })
    ));
    let missing = PredictorKind::External { path: dir.path().join("nope.json") };
    assert!(matches!(fit_predictor::<f64>(&[], 1, 2, &missing), Err(PredictorError::Io { .. })));
}

#[test]
fn model_json_round_trip() {
    let m = PredictorModel::autoregressive(vec![vec![0.5, 0.25]], vec![1.0], 3, 2).unwrap();
    let js = serde_json::to_string(&m).unwrap();
    assert_eq!(serde_json::from_str::<PredictorModel<f64>>(&js).unwrap(), m);
}
