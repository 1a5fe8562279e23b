use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rprv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rprv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_scores(path: &Path, values: impl Iterator<Item = f64>) {
    let v: Vec<f64> = values.collect();
    fs::write(path, serde_json::to_string(&v).unwrap()).unwrap();
}

const SMALL: &str = "calibration = 300\ntests = 40\ntrials = 3\ntraining = 50\naux = 50\n\
                     predictor = \"hold-last\"\nestimation_samples = 300\n";

#[test]
fn calibrate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.json");
    write_scores(&scores, (1..=100).map(f64::from));
    let out = dir.path().join("region.json");
    let s = scores.to_str().unwrap();
    let o = s.to_string();
    let args = ["calibrate", "--scores", s, "--delta", "0.2", "--output", out.to_str().unwrap()];

    let r = rprv(&args);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(&out);
    assert_eq!(v["value"], 81.0);
    assert_eq!(v["feasible"], true);

    let r = rprv(&[&args[..], &["--epsilon", "0.1"]].concat());
    assert_eq!(code(&r), 0);
    let robust = json(&out)["value"].as_f64().unwrap();
    assert!(robust > 81.0 && robust <= 100.0, "{robust}");

    // epsilon >= delta leaves no room for any quantile.
    let r = rprv(&[&args[..], &["--epsilon", "0.2"]].concat());
    assert_eq!(code(&r), 2);
    assert_eq!(json(&out)["feasible"], false);

    let hist = dir.path().join("h.csv");
    let r = rprv(&["calibrate", "--scores", &o, "--histogram", hist.to_str().unwrap(), "--bins", "10"]);
    assert_eq!(code(&r), 0);
    let stdout: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(stdout["value"], 81.0);
    assert_eq!(fs::read_to_string(hist).unwrap().lines().count(), 11);
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&rprv(&["calibrate", "--scores", missing.to_str().unwrap()])), 3);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1\n2\nthree\n").unwrap();
    assert_eq!(code(&rprv(&["calibrate", "--scores", bad.to_str().unwrap()])), 3);

    let good = dir.path().join("good.csv");
    fs::write(&good, "1\n2\n3\n").unwrap();
    let g = good.to_str().unwrap();
    assert_eq!(code(&rprv(&["calibrate", "--scores", g, "--delta", "1.5"])), 3);
    assert_eq!(code(&rprv(&["calibrate", "--scores", g, "--divergence", "hellinger"])), 3);
    assert_eq!(code(&rprv(&["estimate-shift", g, g, g])), 3);
    assert_eq!(code(&rprv(&["frobnicate"])), 3);
    assert_eq!(code(&rprv(&["calibrate"])), 3);

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "colour = 3\n").unwrap();
    assert_eq!(code(&rprv(&["experiment", "--config", cfg.to_str().unwrap()])), 3);
    assert_eq!(code(&rprv(&["experiment", "--method", "oracle"])), 3);

    assert_eq!(code(&rprv(&["--help"])), 0);
}

#[test]
fn estimate_shift_between_score_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    // Uniform on [0, 1) against uniform on [0.5, 1.5): total variation 0.5.
    write_scores(&a, (0..2000).map(|i| (f64::from(i) + 0.5) / 2000.0));
    write_scores(&b, (0..2000).map(|i| 0.5 + (f64::from(i) + 0.5) / 2000.0));
    let out = dir.path().join("eps.json");
    let r = rprv(&[
        "estimate-shift",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        a.to_str().unwrap(),
        a.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(&out);
    let eps = v["epsilon"].as_f64().unwrap();
    assert!((eps - 0.5).abs() < 0.1, "{eps}");
    assert_eq!(v["components"].as_array().unwrap().len(), 2);
}

fn write_trajectories(path: &Path, rows: impl Iterator<Item = (String, Vec<f64>)>) {
    let mut s = String::from("trajectory_id,time_index,x0\n");
    for (id, xs) in rows {
        for (t, x) in xs.iter().enumerate() {
            writeln!(s, "{id},{t},{x}").unwrap();
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn verify_observed_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.csv");
    // Slowly drifting trajectories around 70.
    write_trajectories(
        &cal,
        (0..60).map(|i| {
            let drift = (f64::from(i % 7) - 3.0) * 0.5;
            (format!("c{i}"), (0..6).map(|t| 70.0 + drift * f64::from(t)).collect())
        }),
    );
    let obs = dir.path().join("obs.csv");
    write_trajectories(&obs, std::iter::once(("live".to_string(), vec![70.0, 70.5, 71.0])));
    let out = dir.path().join("verdict.json");
    let base = [
        "verify",
        "--formula",
        "G[0,5] (x0 >= 60)",
        "--calibration",
        cal.to_str().unwrap(),
        "--observed",
        obs.to_str().unwrap(),
        "--t",
        "2",
        "--output",
        out.to_str().unwrap(),
    ];
    let r = rprv(&base);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(&out);
    let rho = v["rho_star"].as_f64().unwrap();
    // Hold-last predicts 71; the worst calibration error is a 1.5 drift over 3 steps.
    assert!(rho > 0.0 && rho <= 10.0, "{rho}");
    assert_eq!(v["method"], "direct");

    let r = rprv(&[&base[..], &["--epsilon", "0.25"]].concat());
    assert_eq!(code(&r), 2);
    assert_eq!(json(&out)["rho_star"], "-inf");

    let r = rprv(&[&base[..], &["--method", "variant1", "--aux", cal.to_str().unwrap()]].concat());
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));

    assert_eq!(code(&rprv(&[&base[..], &["--predictor", "ar:2"]].concat())), 3);
    assert_eq!(code(&rprv(&[&base[..], &["--trajectory-id", "ghost"]].concat())), 3);
    let mut bad = base;
    bad[2] = "G[0,5] (x3 >= 60)";
    assert_eq!(code(&rprv(&bad)), 3);
}

#[test]
fn experiment_and_generate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, SMALL).unwrap();
    let c = cfg.to_str().unwrap();
    let out = dir.path().join("report.json");
    let csvs = dir.path().join("csv");
    let r = rprv(&[
        "experiment",
        "--config",
        c,
        "--epsilon",
        "0.05",
        "--seed",
        "5",
        "--output",
        out.to_str().unwrap(),
        "--csv-dir",
        csvs.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v = json(&out);
    assert_eq!(v["trials"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["seed"], 5);
    assert!(v["mean_coverage"].as_f64().unwrap() >= v["baseline_mean_coverage"].as_f64().unwrap());
    assert_eq!(fs::read_to_string(csvs.join("coverage.csv")).unwrap().lines().count(), 4);

    // Same seed, same bytes.
    let again = dir.path().join("again.json");
    rprv(&["experiment", "--config", c, "--epsilon", "0.05", "--seed", "5", "--output", again.to_str().unwrap()]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let r = rprv(&["experiment", "--config", c, "--epsilon", "0.3", "--trials", "1", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);

    let r = rprv(&["generate", "--config", c, "--side", "test", "--count", "3"]);
    assert_eq!(code(&r), 0);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.starts_with("trajectory_id,time_index,x0"));
    assert_eq!(text.lines().count(), 1 + 3 * 106);

    let traj = dir.path().join("train.json");
    let r = rprv(&["generate", "--config", c, "--count", "2", "--output", traj.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    assert_eq!(json(&traj).as_array().unwrap().len(), 2 * 106);
    assert_eq!(code(&rprv(&["generate", "--count", "1", "--side", "sideways"])), 3);
}
