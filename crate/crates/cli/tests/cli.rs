use std::process::{Command, Output};

use serde_json::Value;

fn cohinfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohinfo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn cohinfo_with_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohinfo"))
        .env("COHINFO_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scalar(v: &Value, key: &str) -> f64 {
    v["scalars"][key].as_f64().unwrap_or_else(|| panic!("missing scalar {key}"))
}

fn without_timing(out: &Output) -> Value {
    let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn tmp_path(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("cohinfo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const SCAN: &[&str] = &[
    "scan-delta",
    "--channel-a",
    "platypus:3",
    "--channel-b",
    "ad:0.5",
    "--axis",
    "r1",
    "--fixed",
    "r2=0.07,r3=0.27",
    "--grid",
    "101",
];

#[test]
fn ci_at_a_point() {
    let v = json(&cohinfo(&["ci", "--channel", "platypus:3", "--state", "u:0.445"]));
    assert_eq!(v["command"], "ci");
    let u: f64 = 0.445;
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    let p = (1.0 - u) / 2.0;
    let expected = 2.0 * t(p) + t(u) - (t(p) + t(1.0 - p));
    assert!((scalar(&v, "coherent_information") - expected).abs() < 1e-12);
    assert!(v["version"].is_string());
    assert_eq!(v["seed"], 0);
}

#[test]
fn ci_curve_along_family() {
    let v = json(&cohinfo(&["ci", "--channel", "platypus:3", "--family", "u", "--grid", "11"]));
    assert_eq!(v["curve"].as_array().unwrap().len(), 11);
    assert!((scalar(&v, "argmax") - 0.4).abs() < 1e-12);
}

#[test]
fn platypus_needs_three_levels() {
    let out = cohinfo(&["ci", "--channel", "platypus:2", "--state", "u:0.4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &["frobnicate"],
        &["ci", "--channel", "platypus:3"],
        &["ci", "--channel", "platypus:3", "--state", "u:0.4", "--bogus", "1"],
        &["ci", "--channel", "nonsense:3", "--state", "u:0.4"],
        &["ci", "--channel", "platypus:3", "--state", "r:0.44,0.07,0.27"],
        &["ci", "--channel", "platypus:3", "--state", "u:0.4", "--format", "csv"],
        &["optimize", "--channel", "platypus:3", "--family", "u:0.4"],
        &["optimize", "--channel", "platypus:3", "--family", "r"],
        &["singularity", "--channel", "platypus:3", "--family", "r"],
        &["singularity", "--channel", "platypus:3", "--family", "u", "--eps-min", "0.2", "--eps-max", "0.1"],
        &["scan-delta", "--channel-a", "platypus:3", "--channel-b", "ad:0.5", "--axis", "r1", "--fixed", "r2=0.07,r4=0.27"],
        &["scan-delta", "--channel-a", "platypus:3", "--channel-b", "ad:0.5", "--axis", "r1", "--fixed", "r2=0.07,r3=0.27", "--range", "0.5,1.0"],
        &["tomo-state", "--channel", "platypus:3", "--state", "u:0.4", "--resamples", "1"],
        &["tomo-process", "--channel", "platypus:3", "--shots", "0"],
    ];
    for args in cases {
        let out = cohinfo(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = cohinfo_with_threads("zero", &["ci", "--channel", "platypus:3", "--state", "u:0.4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mle_non_convergence_exits_one() {
    let out = cohinfo(&["tomo-process", "--channel", "platypus:3", "--shots", "1000", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["scalars"]["converged"], false);
}

#[test]
fn spectral_singularity_of_platypus_output() {
    let v = json(&cohinfo(&[
        "singularity", "--channel", "platypus:3", "--family", "u", "--side", "output", "--method", "spectral",
    ]));
    assert!((scalar(&v, "x") - 1.0).abs() < 1e-3);
    let env = json(&cohinfo(&["singularity", "--channel", "platypus:3", "--family", "u", "--side", "env"]));
    assert_eq!(scalar(&env, "x"), 0.0);
}

#[test]
fn regression_singularity_emits_entropy_curve() {
    let v = json(&cohinfo(&[
        "singularity", "--channel", "tensor(platypus:3,ad:0.5)", "--family", "wv:0.27", "--method", "regression",
    ]));
    assert_eq!(v["curve"].as_array().unwrap().len(), 40);
    assert!((scalar(&v, "x") - 1.0).abs() < 0.03);
}

#[test]
fn optimize_joint_channel_over_r_family() {
    let v = json(&cohinfo(&["optimize", "--channel", "tensor(platypus:3,ad:0.5)", "--family", "r"]));
    let params: Vec<f64> = v["scalars"]["best_params"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (p, target) in params.iter().zip([0.44, 0.07, 0.27]) {
        assert!((p - target).abs() < 0.02, "{params:?}");
    }
}

#[test]
fn optimize_general_for_amplitude_damping() {
    let v = json(&cohinfo(&["optimize", "--channel", "ad:0.5", "--restarts", "8"]));
    assert!(scalar(&v, "best_value").abs() < 1e-6);
}

#[test]
fn process_tomography_fidelity() {
    let v = json(&cohinfo(&["tomo-process", "--channel", "platypus:3", "--shots", "100000", "--seed", "7"]));
    assert!(scalar(&v, "process_fidelity") >= 0.99);
    assert_eq!(v["seed"], 7);
    let exact = json(&cohinfo(&["tomo-process", "--channel", "platypus:3", "--noiseless"]));
    assert!((scalar(&exact, "process_fidelity") - 1.0).abs() < 1e-6);
}

#[test]
fn state_tomography_reports_error_bars() {
    let counts = tmp_path("counts.json");
    let v = json(&cohinfo(&[
        "tomo-state", "--channel", "platypus:3", "--state", "u:0.445", "--resamples", "10",
        "--save-counts", counts.to_str().unwrap(),
    ]));
    let std = v["uncertainty"]["coherent_information"].as_f64().unwrap();
    assert!(std > 0.0 && std < 0.05);
    let exact = scalar(&v, "coherent_information_exact");
    assert!((scalar(&v, "coherent_information") - exact).abs() < 0.05);
    let record: Value = serde_json::from_str(&std::fs::read_to_string(&counts).unwrap()).unwrap();
    assert_eq!(record["dim"], 3);
    assert_eq!(record["shots"], 100000);
    assert!(record["settings"][0]["projectors"].is_array());
}

#[test]
fn scan_delta_has_sign_change_around_positive_region() {
    let v = json(&cohinfo(SCAN));
    let curve = v["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 101);
    let values: Vec<(f64, f64)> = curve
        .iter()
        .map(|p| (p["param"].as_f64().unwrap(), p["value"].as_f64().unwrap()))
        .collect();
    assert!(values.windows(2).all(|w| w[0].0 < w[1].0));
    let interval = v["scalars"]["positive_interval"].as_array().unwrap();
    let (lo, hi) = (interval[0].as_f64().unwrap(), interval[1].as_f64().unwrap());
    assert!(lo < 0.37 && hi > 0.51, "positive on [{lo}, {hi}]");
    let before = values.iter().rev().find(|(p, _)| *p < lo).unwrap();
    let after = values.iter().find(|(p, _)| *p > hi).unwrap();
    assert!(before.1 <= 0.0 && after.1 <= 0.0);
}

#[test]
fn csv_matches_json_curve() {
    let path = tmp_path("scan.csv");
    let mut args = SCAN.to_vec();
    args.extend(["--format", "csv", "--output", path.to_str().unwrap()]);
    let out = cohinfo(&args);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let v = json(&cohinfo(SCAN));
    let curve = v["curve"].as_array().unwrap();
    assert_eq!(rows.len(), curve.len());
    for ((p, val), point) in rows.iter().zip(curve) {
        assert_eq!(*p, point["param"].as_f64().unwrap());
        assert_eq!(*val, point["value"].as_f64().unwrap());
    }
}

#[test]
fn identical_runs_are_byte_identical_apart_from_timing() {
    let args = ["tomo-state", "--channel", "platypus:3", "--state", "u:0.3", "--resamples", "5", "--seed", "11"];
    let a = cohinfo(&args);
    let b = cohinfo(&args);
    assert_eq!(without_timing(&a), without_timing(&b));
    let strip = |o: &Output| {
        String::from_utf8(o.stdout.clone())
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn thread_count_does_not_change_results() {
    let serial = cohinfo_with_threads("1", SCAN);
    let parallel = cohinfo_with_threads("4", SCAN);
    assert_eq!(without_timing(&serial), without_timing(&parallel));
}
