use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optdesign"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env("OPTDESIGN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn poisson(w: [f64; 3]) -> String {
    format!(
        r#"{{
  "region": {{"dim": 2, "kind": "box", "lower": [0, 0], "upper": [1, 1]}},
  "model": {{"family": "poisson", "with_intercept": true, "beta": [0, -2, -2]}},
  "points": [{{"x": [0, 0], "w": {}}}, {{"x": [1, 0], "w": {}}}, {{"x": [0, 1], "w": {}}}]
}}"#,
        w[0], w[1], w[2]
    )
}

const THIRD: f64 = 1.0 / 3.0;

#[test]
fn verify_passes_optimal_and_fails_perturbed() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "good.json", &poisson([THIRD; 3]));
    let out = run(&["verify", s(&good), "--grid-res", "51"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("PASS"));

    let bad = write(&dir, "bad.json", &poisson([0.4, 0.3, 0.3]));
    let out = run(&["verify", s(&bad), "--grid-res", "51"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("FAIL"));
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let broken = write(&dir, "broken.json", "{\"region\": ");
    assert_eq!(code(&run(&["verify", s(&broken)])), 2);

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["eval", s(&missing)])), 2);

    let unnormalized = write(&dir, "sum.json", &poisson([0.5, 0.5, 0.5]));
    assert_eq!(code(&run(&["eval", s(&unnormalized)])), 2);

    assert_eq!(code(&run(&["verify"])), 2);
    assert_eq!(
        code(&run(&[
            "optimize",
            "--family",
            "poisson",
            "--beta",
            "0,-2",
            "--grid-res",
            "1"
        ])),
        2
    );
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn rank_deficient_design_exits_3() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
  "region": {"dim": 2, "kind": "box", "lower": [0, 0], "upper": [1, 1]},
  "model": {"family": "poisson", "with_intercept": true, "beta": [0, -2, -2]},
  "points": [{"x": [0, 0], "w": 0.5}, {"x": [1, 0], "w": 0.5}]
}"#;
    let f = write(&dir, "rank.json", body);
    assert_eq!(code(&run(&["eval", s(&f)])), 3);
    assert_eq!(code(&run(&["verify", s(&f)])), 3);
}

#[test]
fn optimize_iteration_cap_exits_4() {
    let out = run(&[
        "optimize",
        "--family",
        "poisson",
        "--intercept",
        "--beta",
        "0,-2,-2",
        "--grid-res",
        "21",
        "--max-iters",
        "3",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn logistic_to_intercept_adds_origin_at_one_third() {
    let dir = TempDir::new().unwrap();
    let u = 2.399357280515468_f64;
    let body = format!(
        r#"{{
  "region": {{"dim": 2, "kind": "box", "lower": [0, 0], "upper": [null, null]}},
  "model": {{"family": "logistic", "with_intercept": false, "beta": [1, 1]}},
  "points": [{{"x": [0, {u}], "w": 0.5}}, {{"x": [{u}, 0], "w": 0.5}}]
}}"#
    );
    let f = write(&dir, "two.json", &body);
    let dest = dir.path().join("three.json");
    let report = dir.path().join("report.json");
    let out = run(&[
        "transfer",
        s(&f),
        "--direction",
        "to-intercept",
        "--truncate",
        "10",
        "--out",
        s(&dest),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("CERTIFIED"));

    let written: serde_json::Value = serde_json::from_str(&fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(written["model"]["with_intercept"], true);
    let origin = written["points"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["x"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)))
        .expect("origin in support");
    assert!((origin["w"].as_f64().unwrap() - THIRD).abs() < 1e-12);

    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["truncated"], true);
    assert!(rep["condition_margin"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn uncertified_transfer_exits_1_with_report() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "bad.json", &poisson([0.4, 0.3, 0.3]));
    let report = dir.path().join("r.json");
    let out = run(&[
        "transfer",
        s(&f),
        "--direction",
        "to-no-intercept",
        "--grid-res",
        "21",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 1);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["certified"], false);
}

#[test]
fn exponential_model_transfer_is_uncertified() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
  "region": {"dim": 1, "kind": "box", "lower": [0], "upper": [150]},
  "model": {"family": "exp_regression", "with_intercept": true, "beta": [0], "nonlinear_params": [1, 50]},
  "points": [{"x": [0], "w": 0.3333333333333333}, {"x": [108], "w": 0.3333333333333333}, {"x": [150], "w": 0.3333333333333334}]
}"#;
    let f = write(&dir, "exp.json", body);
    let report = dir.path().join("r.json");
    let out = run(&[
        "transfer",
        s(&f),
        "--direction",
        "to-no-intercept",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 1);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["premise"], "vanishes_at_origin");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", &poisson([THIRD; 3]));
    let mut files = Vec::new();
    for k in 0..2 {
        let dest = dir.path().join(format!("t{k}.json"));
        let report = dir.path().join(format!("r{k}.json"));
        let csv = dir.path().join(format!("s{k}.csv"));
        let opt = dir.path().join(format!("o{k}.json"));
        let threads = if k == 0 { "1" } else { "3" };
        let status = bin()
            .args([
                "transfer",
                s(&f),
                "--direction",
                "to-no-intercept",
                "--grid-res",
                "31",
                "--out",
                s(&dest),
            ])
            .args(["--report", s(&report)])
            .env("OPTDESIGN_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
        let status = bin()
            .args(["verify", s(&f), "--grid-res", "31", "--emit-sensitivity", s(&csv)])
            .env("OPTDESIGN_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
        let status = bin()
            .args([
                "optimize",
                "--family",
                "poisson",
                "--intercept",
                "--beta",
                "0,-2,-2",
                "--grid-res",
                "21",
            ])
            .args(["--cluster-radius", "0.06", "--out", s(&opt)])
            .env("OPTDESIGN_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
        files.push([dest, report, csv, opt].map(|p| fs::read(p).unwrap()));
    }
    assert_eq!(files[0], files[1]);

    let csv = String::from_utf8(files[0][2].clone()).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,x2,psi,threshold"));
    assert_eq!(csv.lines().count(), 1 + 31 * 31);
}

#[test]
fn ustar_is_stable() {
    let a = run(&["ustar"]);
    let b = run(&["ustar"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("u* = 2.39935728052\n"));
}

#[test]
fn eval_prints_criterion_values() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "p.json", &poisson([THIRD; 3]));
    let out = run(&["eval", s(&f)]);
    assert_eq!(code(&out), 0);
    let line = stdout(&out);
    let value: f64 = line.trim().strip_prefix("det(M^-1) = ").unwrap().parse().unwrap();
    // det M = (1/3)^3 det(V)^2 with V the regressor rows, det V = e^{-2}.
    let expected = 27.0 * 4f64.exp();
    assert!((value - expected).abs() < 1e-9 * expected, "{value} vs {expected}");

    let out = run(&["eval", s(&f), "--criterion", "a"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("tr(M^-1) = "));
}
