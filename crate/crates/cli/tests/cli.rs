// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end checks of the `cpdetect` binary: exit codes, output schema,
//! and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpdetect"))
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).expect("write test file");
    path
}

fn run(args: &[&str], cache: &Path) -> Output {
    bin()
        .args(args)
        .arg("--cache")
        .arg(cache)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json on stdout")
}

#[test]
fn detect_noiseless_step_with_dp() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "step.csv", "0\n0\n0\n10\n10\n10\n");
    let cache = dir.path().join("cache.json");
    let out = run(
        &[
            "detect",
            "--input",
            input.to_str().unwrap(),
            "--procedure",
            "dp",
            "--l",
            "2",
            "--q",
            "4",
        ],
        &cache,
    );
    let json = stdout_json(&out);
    assert_eq!(json["changepoints"], serde_json::json!([4]));
    assert!((json["criterion"].as_f64().unwrap() - 13.545).abs() < 0.01);
}

#[test]
fn detect_constant_column_is_empty_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "const.csv", "t,v\n1,5.0\n2,5.0\n3,5.0\n4,5.0\n");
    let cache = dir.path().join("cache.json");
    let out = run(
        &[
            "detect",
            "--input",
            input.to_str().unwrap(),
            "--header",
            "--column",
            "2",
            "--procedure",
            "dp",
            "--q",
            "4",
        ],
        &cache,
    );
    let json = stdout_json(&out);
    assert_eq!(json["n"], serde_json::json!(4));
    assert_eq!(json["changepoints"].as_array().unwrap().len(), 0);

    // Round trip: every reported position must be a valid change-point for n.
    let n = json["n"].as_u64().unwrap() as usize;
    for cp in json["changepoints"].as_array().unwrap() {
        let tau = cp.as_u64().unwrap() as usize;
        assert!((2..=n).contains(&tau));
    }
}

#[test]
fn missing_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let out = run(
        &["detect", "--input", "does-not-exist.csv", "--procedure", "dp", "--q", "4"],
        &cache,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_numeric_reports_line_number_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "1.0\n2.0\noops\n3.0\n");
    let cache = dir.path().join("cache.json");
    let out = run(
        &["detect", "--input", input.to_str().unwrap(), "--procedure", "dp", "--q", "4"],
        &cache,
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn invalid_tuning_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "ok.csv", "1\n2\n3\n4\n");
    let cache = dir.path().join("cache.json");
    let out = run(
        &[
            "detect",
            "--input",
            input.to_str().unwrap(),
            "--procedure",
            "dp",
            "--l",
            "0.5",
            "--q",
            "4",
        ],
        &cache,
    );
    assert_eq!(out.status.code(), Some(3));

    let out = run(
        &["test", "--input", input.to_str().unwrap(), "--l", "1.0"],
        &cache,
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn identical_flags_produce_byte_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::new();
    for i in 0..200 {
        body.push_str(&format!("{}\n", (i % 7) as f64 * 0.25 + if i > 120 { 3.0 } else { 0.0 }));
    }
    let input = write(dir.path(), "series.csv", &body);
    let cache = dir.path().join("cache.json");
    let args = [
        "detect",
        "--input",
        input.to_str().unwrap(),
        "--procedure",
        "lp-full",
        "--zeta",
        "2.5",
        "--sigma",
        "auto",
    ];
    let a = run(&args, &cache);
    let b = run(&args, &cache);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn calibrate_is_deterministic_and_updates_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let args = [
        "calibrate", "--kind", "zeta", "--n", "64", "--alpha", "0.05", "--reps", "200", "--seed", "1",
    ];
    let a = run(&args, &cache);
    let b = run(&args, &cache);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(cache.exists());
    let text = std::fs::read_to_string(&cache).unwrap();
    assert!(text.contains("zeta"));
}

#[test]
fn cache_env_var_overrides_default_path() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("env-cache.json");
    let out = bin()
        .args([
            "calibrate", "--kind", "q", "--n", "32", "--alpha", "0.1", "--reps", "100", "--seed", "2",
        ])
        .env("CPDETECT_CACHE", &cache)
        .current_dir(dir.path())
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert!(cache.exists());
}

#[test]
fn simulate_bundled_null_scenario_respects_the_level() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios/null_single_test.json");
    let out = run(
        &["simulate", "--scenario", scenario.to_str().unwrap()],
        &cache,
    );
    let json = stdout_json(&out);
    let rate = json["rejection"]["rate"].as_f64().unwrap();
    assert!(rate <= 0.065, "null rejection rate {rate}");

    // CSV output carries one row per metric.
    let out = run(
        &[
            "simulate",
            "--scenario",
            scenario.to_str().unwrap(),
            "--output",
            "csv",
        ],
        &cache,
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("scenario,metric,value,se"));
    assert!(text.contains("rejection_rate"));
}

#[test]
fn bench_emits_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let out = run(&["bench", "--n-grid", "256,512", "--seed", "3"], &cache);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,procedure,seconds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 3);
        assert!(fields[2].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn test_and_ci_subcommands_report_single_change_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let mut body = String::new();
    for i in 0..64 {
        body.push_str(if i < 32 { "0\n" } else { "8\n" });
    }
    let input = write(dir.path(), "jump.csv", &body);

    let out = run(&["test", "--input", input.to_str().unwrap()], &cache);
    let json = stdout_json(&out);
    assert_eq!(json["reject"], serde_json::json!(true));
    assert_eq!(json["argmin_tau"], serde_json::json!(33));

    let out = run(&["ci", "--input", input.to_str().unwrap()], &cache);
    let json = stdout_json(&out);
    assert_eq!(json["informative"], serde_json::json!(true));
    let lo = json["interval"][0].as_u64().unwrap();
    let hi = json["interval"][1].as_u64().unwrap();
    assert!(lo <= 33 && 33 <= hi);
}
