use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).output().expect("binary runs")
}

fn generate(dir: &Path, example: &str, seed: &str) -> String {
    let path = dir.join(format!("ex{example}_{seed}.csv"));
    let p = path.to_str().unwrap().to_owned();
    let out = lab(&["generate", "--example", example, "--n", "300", "--seed", seed, "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn generate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read_to_string(generate(dir.path(), "2", "9")).unwrap();
    let b = std::fs::read_to_string(generate(dir.path(), "2", "9")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("x1,x2,label\n"));
    assert_eq!(a.lines().count(), 301);
}

#[test]
fn fit_writes_result_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "1", "1");
    let out = dir.path().join("fit.json");
    let prefix = dir.path().join("run");
    for algo in ["em", "delta-em", "kmeans", "delta-kmeans", "qem"] {
        let status = lab(&[
            "fit",
            "--algo",
            algo,
            "--data",
            &data,
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
            "--plot",
            prefix.to_str().unwrap(),
        ]);
        assert!(status.status.success(), "{algo}: {}", String::from_utf8_lossy(&status.stderr));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(v.get("iterations").is_some(), "{algo}");
        assert!(dir.path().join("run.trace.csv").exists());
        assert!(dir.path().join("run.scatter.svg").exists());
    }
}

#[test]
fn fit_with_same_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "1", "5");
    let run = || lab(&["fit", "--algo", "delta-em", "--data", &data, "--seed", "11"]).stdout;
    assert_eq!(run(), run());
}

#[test]
fn bench_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"example": "I", "n": 200, "algorithm": "kmeans", "trials": 4}"#).unwrap();
    let report = dir.path().join("out/report.json");
    let out = lab(&["bench", "--config", cfg.to_str().unwrap(), "--seed", "2", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.exists() && report.with_extension("csv").exists());

    let sweep = dir.path().join("sweep.csv");
    let out = lab(&["sweep", "--deltas", "0.1,1", "--config", cfg.to_str().unwrap(), "--out", sweep.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&sweep).unwrap().lines().count(), 3);
}

#[test]
fn cost_prints_every_term() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "2", "0");
    let out = lab(&["cost", "--data", &data, "--delta", "0.2", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["kappa_v1", "mu_v2", "eta_sigma", "term_pi", "term_sigma_norm", "total"] {
        assert!(v[key].as_f64().unwrap() > 0.0, "{key}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 0}"#).unwrap();
    assert_eq!(lab(&["bench", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lab(&["cost", "--data", "/nonexistent.csv", "--delta", "0.2"]).status.code(), Some(2));
    assert_eq!(lab(&["fit", "--algo", "nope", "--data", "x.csv"]).status.code(), Some(2));

    // Coordinates near the overflow limit make every covariance infinite.
    let huge = dir.path().join("huge.csv");
    std::fs::write(&huge, "x1,x2\n1e300,2\n-1e300,3\n5e299,-1\n1,1\n").unwrap();
    assert_eq!(lab(&["fit", "--algo", "em", "--data", huge.to_str().unwrap()]).status.code(), Some(3));
}
