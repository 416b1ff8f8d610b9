//! End-to-end checks of the installed binary: flag parsing, exit
//! codes, and output formats.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mcb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn seeded_mid_rate_decides_the_top_bucket_with_a_blank_rating() {
    let out = mcb(&[
        "decide", "--buckets", "Jstar", "--method", "simctest", "--eps", "1e-3", "--p", "0.5",
        "--seed", "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["rating"], "");
    assert_eq!(report["outcome"], "decided");
    assert_eq!(report["bucket"]["hi"], 1.0);
    // Same seed, same bytes.
    let again = mcb(&[
        "decide", "--buckets", "Jstar", "--method", "simctest", "--eps", "1e-3", "--p", "0.5",
        "--seed", "7",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn the_single_bucket_family_decides_at_the_first_evaluation() {
    let out = mcb(&["decide", "--buckets", "single", "--p", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["bucket"]["lo"], 0.0);
    assert_eq!(report["bucket"]["hi"], 1.0);
    assert_eq!(report["samples"], 10);
}

#[test]
fn a_boundary_rate_under_a_non_overlapping_family_truncates_with_exit_2() {
    let out = mcb(&[
        "decide", "--buckets", "J0", "--n-cap", "1000", "--p", "0.05", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["outcome"], "truncated");
    assert_eq!(report["samples"], 1000);
}

#[test]
fn boundary_export_starts_with_the_pinned_first_row() {
    let out = mcb(&["boundaries", "--alpha", "0.05", "--rho", "5e-4", "--n", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,lower,upper,eps,spent_lower,spent_upper"));
    assert!(lines.next().unwrap().starts_with("1,-1,2,"), "{text}");
}

#[test]
fn config_errors_exit_1_with_a_message() {
    let out = mcb(&["decide", "--buckets", "nonsense", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown bucket family"), "{err}");

    let out = mcb(&["decide", "--buckets", "Jstar"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--p or --stream"), "{err}");

    let out = mcb(&["boundaries", "--alpha", "0.05", "--rho", "0.7", "--n", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn recorded_streams_replay_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("stream.csv");
    std::fs::write(&stream, "size,ones\n10,3\n").unwrap();
    let out = mcb(&[
        "decide", "--buckets", "single", "--stream", stream.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["samples"], 10);
    assert_eq!(report["exceedances"], 3);
    assert_eq!(report["estimate"], 0.3);

    // A dried-up stream truncates.
    let out = mcb(&[
        "decide", "--buckets", "Jstar", "--stream", stream.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_files_supply_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"buckets":"Jstar","method":"simctest","eps":0.001,"spending_k":1000.0,
            "batch_initial":10,"batch_growth":1.1,"seed":7,"n_cap":10000000}"#,
    )
    .unwrap();
    let via_config = mcb(&["decide", "--config", cfg.to_str().unwrap(), "--p", "0.5"]);
    let via_flags = mcb(&["decide", "--seed", "7", "--p", "0.5"]);
    assert_eq!(via_config.status.code(), Some(0));
    assert_eq!(via_config.stdout, via_flags.stdout);

    // A flag beats the config file.
    let overridden = mcb(&[
        "decide", "--config", cfg.to_str().unwrap(), "--seed", "8", "--p", "0.5",
    ]);
    let direct = mcb(&["decide", "--seed", "8", "--p", "0.5"]);
    assert_eq!(overridden.stdout, direct.stdout);
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = mcb(&[
        "decide", "--buckets", "single", "--p", "0.2", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["outcome"], "decided");
}

#[test]
fn effort_csv_has_both_methods_and_a_small_tail_above_the_top_threshold() {
    let out = mcb(&[
        "effort", "--buckets", "Jstar", "--eps", "0.05", "--grid", "19", "--n-cap", "400000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("p,effort_rl,effort_simctest,lower_basic,lower_improved")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 19);
    // Effort decays toward a handful of draws far above every threshold.
    let near = &rows[1]; // p = 0.10
    let far = &rows[18]; // p = 0.95
    assert!(far[1] < near[1] && far[2] < near[2], "{far:?} vs {near:?}");
    assert!(far[1] < 100.0 && far[2] < 100.0);
}

#[test]
fn probability_csv_masses_sum_to_one_per_row() {
    let out = mcb(&[
        "effort", "--buckets", "J0", "--eps", "0.05", "--grid", "9", "--probs", "--method",
        "rl", "--n-cap", "200000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,***,**,*,none,undecided"));
    for line in lines {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let total: f64 = vals[1..].iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn screening_report_is_deterministic_and_consistent() {
    let args = [
        "screen", "--hypotheses", "20", "--alternatives", "4", "--eps", "1e-2", "--seed", "3",
        "--n-cap", "20000", "--summary-only",
    ];
    let a = mcb(&args);
    assert_eq!(a.status.code(), Some(0), "{a:?}");
    let b = mcb(&args);
    assert_eq!(a.stdout, b.stdout);
    let report = stdout_json(&a);
    let counts: u64 = report["bucket_counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(counts, 20);
    assert!(report["naive_floor"].as_f64().unwrap() > 0.0);
    assert_eq!(report["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn lowerbound_csv_orders_improved_above_basic() {
    let out = mcb(&["lowerbound", "--buckets", "Jstar", "--eps", "1e-3", "--grid", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,lower_basic,lower_improved"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[2] >= v[1], "{line}");
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_mcb"))
            .env("MCB_THREADS", threads)
            .args(["effort", "--buckets", "Jstar", "--eps", "0.05", "--grid", "7",
                   "--n-cap", "300000"])
            .output()
            .expect("binary runs")
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn bucket_set_files_feed_every_run_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("toy.json");
    std::fs::write(
        &set,
        r#"{"name":"toy","buckets":[
            {"lo":0.0,"hi":0.6,"lo_closed":true,"hi_closed":true},
            {"lo":0.4,"hi":1.0,"lo_closed":false,"hi_closed":true}]}"#,
    )
    .unwrap();
    let out = mcb(&[
        "decide", "--buckets", set.to_str().unwrap(), "--p", "0.9", "--eps", "0.01",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["bucket"]["lo"], 0.4);
    assert!(Path::new(set.to_str().unwrap()).exists());
}
