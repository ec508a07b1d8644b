use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ain_sim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ain-sim"))
        .args(args)
        .current_dir(dir)
        .env_remove("AIN_SIM_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn channel_file(dir: &Path, name: &str, first: [[f64; 2]; 4], second: [[f64; 2]; 4]) -> String {
    let hop = |h: [[f64; 2]; 4]| h.iter().map(|z| vec![*z]).collect::<Vec<_>>();
    let doc = serde_json::json!({
        "model": "constant_complex",
        "hops": [hop(first), hop(second)],
        "seed": null,
        "bounds": [0.1, 10.0],
    });
    std::fs::write(dir.join(name), doc.to_string()).unwrap();
    name.to_string()
}

fn polar(r: f64, p: f64) -> [f64; 2] {
    [r * p.cos(), r * p.sin()]
}

#[test]
fn simulate_is_reproducible_and_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["simulate", "--m", "2", "--seeds", "3", "--trials", "2000", "--scheme", "both"];
    let a = ain_sim(&[&base[..], &["--out", "a", "--jobs", "1"]].concat(), tmp.path());
    let b = ain_sim(&[&base[..], &["--out", "b", "--jobs", "4"]].concat(), tmp.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    for name in ["simulate.csv", "summary.json"] {
        let x = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(tmp.path().join("a/simulate.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# ain-sim ") && csv.contains("config_hash="));
    assert_eq!(lines.next().unwrap(), "scheme,M,P_db,stream,sinr_db,sum_rate,leakage,seed");
    // 2 schemes x 3 seeds x 4 powers, 3 aligned streams or 2 TDMA slots each
    assert_eq!(lines.count(), 3 * 4 * 3 + 3 * 4 * 2);
    let summary = read_json(&tmp.path().join("a/summary.json"));
    assert_eq!(summary["min_cut_dof_bound"], 2.0);
    assert!(summary["results"][0]["dof_slope"].is_f64());
}

#[test]
fn single_slot_slope_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["simulate", "--m", "1", "--seeds", "4", "--sinr", "analytic", "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0);
    let slope = read_json(&tmp.path().join("o/summary.json"))["results"][0]["dof_slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("cfg.json"), r#"{"m": 3, "seeds": 2, "sinr": "analytic"}"#).unwrap();
    let out = ain_sim(&["--config", "cfg.json", "simulate", "--m", "1", "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&tmp.path().join("o/summary.json"));
    assert_eq!(summary["config"]["m"], 1);
    assert_eq!(summary["config"]["seeds"], 2);
}

#[test]
fn bad_configuration_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ain_sim(&["simulate", "--p-grid", "30,abc"], tmp.path())), 2);
    assert_eq!(code(&ain_sim(&["simulate", "--gamma", "2"], tmp.path())), 2);
    assert_eq!(code(&ain_sim(&["simulate", "--bogus"], tmp.path())), 2);
    std::fs::write(tmp.path().join("bad.json"), r#"{"m": 2, "unknown": 1}"#).unwrap();
    assert_eq!(code(&ain_sim(&["--config", "bad.json", "simulate"], tmp.path())), 2);
    std::fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&ain_sim(&["check-phases", "--channel", "broken.json"], tmp.path())), 2);
}

#[test]
fn rational_sweep_writes_ser_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["rational", "--m", "2", "--p-grid", "1e4,1e8", "--trials", "3000", "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("o/rational.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "P,M,gamma,epsilon,relay1_ser,relay2_ser,d1_ser,d2_ser,rate_lb_1,rate_lb_2");
    assert_eq!(lines.len(), 4);
    let report = read_json(&tmp.path().join("o/rational.json"));
    for point in report["points"].as_array().unwrap() {
        let p = point["P"].as_f64().unwrap();
        for power in point["max_tx_power"].as_array().unwrap() {
            assert!(power.as_f64().unwrap() <= p * (1.0 + 1e-12));
        }
    }
}

#[test]
fn noiseless_rational_has_no_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["rational", "--noise-var", "0", "--trials", "1000", "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0);
    let report = read_json(&tmp.path().join("o/rational.json"));
    for point in report["points"].as_array().unwrap() {
        for key in ["relay1_ser", "relay2_ser", "d1_ser", "d2_ser"] {
            assert_eq!(point[key], 0.0, "{key}");
        }
    }
}

#[test]
fn oversized_rational_search_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["rational", "--m", "9"], tmp.path());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("enumeration cap"));
}

#[test]
fn multihop_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["multihop", "--hops", "2", "--seeds", "200", "--out", "two"], tmp.path());
    assert_eq!(code(&out), 0);
    let gaps = read_json(&tmp.path().join("two/multihop.json"));
    assert!(gaps["min_ratio_gap"].as_f64().unwrap() > 1e-6);

    let out = ain_sim(&["multihop", "--hops", "3", "--seeds", "20", "--out", "three"], tmp.path());
    assert_eq!(code(&out), 0);
    let table = read_json(&tmp.path().join("three/multihop.json"));
    assert!(table["converged"].as_u64().unwrap() >= 19);
    let first = &table["reports"][0];
    for key in ["hops", "converged", "residual", "diag_min", "iters", "gains"] {
        assert!(!first[key].is_null(), "{key}");
    }
    assert_eq!(first["gains"].as_array().unwrap().len(), 4);
}

#[test]
fn real_positive_channel_fails_both_phase_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let f = channel_file(tmp.path(), "real.json", [[1.0, 0.0], [2.0, 0.0], [0.5, 0.0], [3.0, 0.0]], [[1.5, 0.0], [0.7, 0.0], [2.0, 0.0], [1.1, 0.0]]);
    let out = ain_sim(&["check-phases", "--channel", &f, "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0);
    let report = read_json(&tmp.path().join("o/check_phases.json"));
    assert_eq!(report["first_hop_ok"], false);
    assert_eq!(report["second_hop_ok"], false);
    assert!(report["pipeline"].is_null());
}

#[test]
fn marginal_phase_sum_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let h = std::f64::consts::FRAC_PI_2;
    let f = [polar(1.0, 0.0), polar(1.0, h), polar(1.0, h + 1e-12), polar(1.0, 0.0)];
    let g = [polar(1.0, 0.3), polar(2.0, 1.9), polar(0.5, -0.4), polar(1.2, 2.2)];
    let name = channel_file(tmp.path(), "marginal.json", f, g);
    let out = ain_sim(&["check-phases", "--channel", &name, "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0);
    let report = read_json(&tmp.path().join("o/check_phases.json"));
    assert_eq!(report["first_hop_ok"], false);
    assert_eq!(report["second_hop_ok"], true);
    assert_eq!(report["near_degenerate"], true);
}

#[test]
fn random_phase_channel_runs_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["check-phases", "--seed", "4", "--sinr", "analytic", "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0);
    let report = read_json(&tmp.path().join("o/check_phases.json"));
    assert_eq!(report["first_hop_ok"], true);
    assert_eq!(report["second_hop_ok"], true);
    assert!(report["pipeline"]["dof_slope"].is_f64());
}

#[test]
fn dumped_channel_feeds_back_in() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ain_sim(&["dump-channel", "--seed", "9", "--model", "constant_complex", "--out", "ch.json"], tmp.path());
    assert_eq!(code(&out), 0);
    let doc = read_json(&tmp.path().join("ch.json"));
    assert_eq!(doc["model"], "constant_complex");
    assert_eq!(doc["seed"], 9);
    let out = ain_sim(&["check-phases", "--channel", "ch.json", "--sinr", "analytic", "--out", "o"], tmp.path());
    assert_eq!(code(&out), 0);
    let stdout = ain_sim(&["dump-channel", "--seed", "9", "--model", "constant_complex"], tmp.path()).stdout;
    let again: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(again, doc);
}
