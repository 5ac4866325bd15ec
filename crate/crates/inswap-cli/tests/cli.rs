//! End-to-end runs of the `inswap` binary.

use inswap::potential::{classify_two_well, extract_landscape, Potential};
use inswap::rates::optimal_two_well;
use inswap::{Franz, Target};
use inswap_cli::RunConfig;
use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

/// Two wells: global minimum 0 at 0, second minimum 0.5 at 2, lowest exit
/// from the global well at level 1. `wall` is the other saddle.
fn two_wells(dir: &Path, wall: f64) -> String {
    let path = dir.join(format!("two_{wall}.txt"));
    let text = format!("period 4\nstart -1.5\nsaddle(-1, {wall})\nmin(0, 0)\nsaddle(1, 1)\nmin(2, 0.5)\n");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn inswap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inswap")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn run_json(dir: &Path, sub: &str, cfg: &Value) -> Value {
    let c = write_config(dir, cfg);
    stdout_json(&inswap(&[sub, "--config", &c]))
}

fn close(a: &Value, b: f64, tol: f64) {
    let a = a.as_f64().unwrap();
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

#[test]
fn verify_passes_and_detects_a_corrupted_cost_table() {
    let ok = inswap(&["verify"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).matches("PASS").count(), 5);
    let bad = inswap(&["verify", "--suite", "w-u-identity", "--inject-fault", "corrupt-cost-table"]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stdout).starts_with("FAIL"));
    assert_eq!(code(&inswap(&["verify", "--suite", ","])), 1);
    assert_eq!(code(&inswap(&["verify", "--suite", "nonsense"])), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&inswap(&["analyze"])), 1);
    assert_eq!(code(&inswap(&["frobnicate"])), 1);
    assert_eq!(code(&inswap(&["--help"])), 0);
}

#[test]
fn franz_analysis_matches_the_optimal_two_well_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_json(
        dir.path(),
        "analyze",
        &json!({"potential": {"kind": "franz", "theta": 0.85}, "ladder": {"rule": "optimal", "k": 2}, "target": [0.6, 1.1]}),
    );
    let p = Franz::new(0.85).unwrap();
    let lg = extract_landscape(&p, 20_000).unwrap();
    let spec = classify_two_well(&lg).unwrap();
    let target = Target::from_potential(&p, &lg, 0.6, 1.1).unwrap();
    let expect = optimal_two_well(&spec, &target, 2, 0.1).unwrap();
    close(&a["predicted_rate"], expect.predicted_rate, 1e-12);
    close(&a["predicted_rate"], 0.32211, 1e-4);
    for key in ["h", "w", "w_upper_bound", "B", "min_horizon_exponent"] {
        assert!(a[key].is_number(), "{key} missing");
    }
    assert!(a["multiwell"]["predicted_rate"].is_number());
}

#[test]
fn single_temperature_gives_the_plain_rate() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_wells(dir.path(), 4.0);
    // V(A) = 2 sits above the exit level 1
    let a = run_json(
        dir.path(),
        "analyze",
        &json!({"potential": {"kind": "critical_points", "path": path}, "ladder": {"rule": "geometric", "k": 1}, "target": [-0.7, -0.5]}),
    );
    close(&a["v_of_a"], 2.0, 1e-12);
    close(&a["predicted_rate"], 2.0, 1e-12);
}

#[test]
fn geometric_ladder_gap_combines_level_and_b() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_wells(dir.path(), 2.0);
    let a = run_json(
        dir.path(),
        "analyze",
        &json!({"potential": {"kind": "critical_points", "path": path}, "ladder": {"rule": "geometric", "k": 7}, "target": [-0.7, -0.5]}),
    );
    close(&a["v_of_a"], 1.0, 1e-12);
    let b = a["B"].as_f64().unwrap();
    close(&a["multiwell"]["gap"], (1.0 + b) / 64.0, 1e-12);
}

#[test]
fn optimize_reproduces_the_three_cases() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_wells(dir.path(), 4.0);
    let cp = |target: [f64; 2], k: usize| {
        json!({"potential": {"kind": "critical_points", "path": path}, "ladder": {"rule": "optimal", "k": k}, "target": target})
    };

    let l = run_json(dir.path(), "optimize", &cp([-0.7, -0.5], 3));
    close(&l["predicted_rate"], 3.5, 1e-12);
    assert_eq!(l["alphas"], json!([1.0, 0.5, 0.25]));

    let l = run_json(dir.path(), "optimize", &cp([0.5, 0.7], 2));
    close(&l["predicted_rate"], 2.0 / 3.0, 1e-12);
    close(&l["alphas"][1], 1.0 / 3.0, 1e-12);

    // right well of Franz at level 0.8: walk up the right wall to V = 0.8
    let p = Franz::new(0.85).unwrap();
    let (mut lo, mut hi) = (1.1, 2.0);
    assert!(p.value(lo) < 0.8 && p.value(hi) > 0.8);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if p.value(mid) < 0.8 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = run_json(
        dir.path(),
        "optimize",
        &json!({"potential": {"kind": "franz", "theta": 0.85}, "ladder": {"rule": "optimal", "k": 2}, "target": [hi, hi + 0.05]}),
    );
    let lg = extract_landscape(&p, 20_000).unwrap();
    let h_r = classify_two_well(&lg).unwrap().h_r;
    let v = p.value(hi);
    close(&l["predicted_rate"], 2.0 * v - h_r / (v - (1.0 - 2.0 * h_r)) * v, 1e-6);
    close(&l["predicted_rate"], 1.127, 2e-3);
    close(&l["alphas"][1], (v - (1.0 - h_r)) / (v - (1.0 - 2.0 * h_r)), 1e-6);
    assert_eq!(l["boundary_substituted"], json!(false));
}

#[test]
fn boundary_ladder_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let l = run_json(
        dir.path(),
        "optimize",
        &json!({"potential": {"kind": "franz", "theta": 0.85}, "ladder": {"rule": "optimal", "k": 2}, "target": [0.6, 1.1]}),
    );
    assert_eq!(l["boundary_substituted"], json!(true));
    close(&l["alphas"][1], 0.1, 1e-12);
}

#[test]
fn synthetic_plan_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let c = write_config(
        dir.path(),
        &json!({
            "potential": {"kind": "franz", "theta": 0.85},
            "target": [0.6, 1.1],
            "method": {"kind": "synthetic", "rate": 1.0, "level": 0.3},
            "replications": 30,
            "horizon": {"rule": "time", "t": 1.0}
        }),
    );
    let o = inswap(&["simulate", "--config", &c, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("record.json").exists());
    assert!(out.join("synthetic.csv").exists());
}

#[test]
fn paired_plan_records_both_fits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let c = write_config(
        dir.path(),
        &json!({
            "potential": {"kind": "franz", "theta": 0.85},
            "target": [0.6, 1.1],
            "arms": [
                {"label": "mcmc", "method": {"kind": "mcmc"}},
                {"label": "ins", "method": {"kind": "ins"}, "ladder": {"rule": "optimal", "k": 2}}
            ],
            "eps_grid": [0.5, 0.4],
            "replications": 30,
            "horizon": {"rule": "time", "t": 5.0},
            "check_bias": false
        }),
    );
    let o = inswap(&["simulate", "--config", &c, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(out.join("record.json")).unwrap()).unwrap();
    let arms = rec["arms"].as_array().unwrap();
    assert_eq!(arms.len(), 2);
    for a in arms {
        assert!(a["fit"]["rate"].is_number(), "{}", a["label"]);
    }
}

#[test]
fn increasing_ladder_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let c = write_config(
        dir.path(),
        &json!({
            "potential": {"kind": "franz", "theta": 0.85},
            "ladder": {"rule": "explicit", "alphas": [1.0, 0.5, 0.7]},
            "target": [0.6, 1.1]
        }),
    );
    for sub in ["simulate", "analyze", "optimize"] {
        let o = inswap(&[sub, "--config", &c, "--seed", "1", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 1);
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("Δ") && err.contains("ladder"), "{err}");
        assert!(!out.exists());
    }
}

#[test]
fn simulate_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        &json!({"potential": {"kind": "franz", "theta": 0.85}, "target": [0.6, 1.1]}),
    );
    let o = inswap(&["simulate", "--config", &c, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn bad_targets_and_k_name_their_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = inswap(&[
        "analyze",
        "--config",
        &write_config(dir.path(), &json!({"potential": {"kind": "franz", "theta": 0.85}, "target": [1.5, 2.5]})),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("target"));
    let c = write_config(
        dir.path(),
        &json!({"potential": {"kind": "franz", "theta": 0.85}, "target": [0.6, 1.1], "ladder": {"rule": "geometric", "k": 2}}),
    );
    let o = inswap(&["analyze", "--config", &c, "--K", "9"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ladder"));
}

#[test]
fn outputs_land_in_the_requested_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let c = write_config(
        dir.path(),
        &json!({"potential": {"kind": "franz", "theta": 0.85}, "target": [0.6, 1.1], "ladder": {"rule": "optimal", "k": 2}}),
    );
    let o = inswap(&["analyze", "--config", &c, "--out", out.to_str().unwrap(), "--K", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(a["k"], json!(3));
}

#[test]
fn config_round_trips() {
    let text = json!({
        "potential": {"kind": "franz", "theta": 0.7},
        "ladder": {"rule": "optimal", "k": 3, "delta": 0.2},
        "target": [0.6, 1.1],
        "arms": [{"label": "pt", "method": {"kind": "pt"}, "ladder": {"rule": "explicit", "alphas": [1.0, 0.5]}, "swap_rate": 40.0}],
        "seed": 9,
        "horizon": {"rule": "fixed", "c": 2.0}
    })
    .to_string();
    let cfg = RunConfig::from_json(&text).unwrap();
    let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(back, cfg);
    cfg.validate().unwrap();
}
