use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wpiot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpiot"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SMALL: &str = r#"
[scenario]
users = 6
channels = 3
capacity = 3

[mdp]
horizon = 6
battery_levels = 16

[experiment]
episodes = 20
instances = 4

[figures]
fig3_users = [4, 5]
horizons = [4, 8]
"#;

#[test]
fn minimal_allocation_is_one_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "[scenario]\nusers = 1\nchannels = 1\ncapacity = 1\n",
    )
    .unwrap();
    let summary = stdout_json(&wpiot(dir.path(), &["--config", "c.toml", "--out", "o", "allocate"]));
    let csv = fs::read_to_string(dir.path().join("o/allocation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,"));
    assert_eq!(summary["matching"], serde_json::json!([0]));
    assert_eq!(summary["stable"], true);
}

#[test]
fn allocation_stats_within_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let summary = stdout_json(&wpiot(dir.path(), &["--out", "o", "--seed", "5", "allocate"]));
    let stats = &summary["stats"];
    assert!(stats["max_evaluations_per_iteration"].as_f64().unwrap() <= stats["evaluation_bound"].as_f64().unwrap());
    assert!(stats["init_proposals"].as_u64().unwrap() <= stats["proposal_bound"].as_u64().unwrap());
    assert_eq!(summary["stable"], true);
}

#[test]
fn malformed_config_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[mdp]\nhorizon = -3\n").unwrap();
    let out = wpiot(dir.path(), &["--config", "bad.toml", "plan"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_config");
    assert_eq!(err["error"]["path"], "mdp.horizon");

    fs::write(dir.path().join("over.toml"), "[scenario]\nusers = 100\n").unwrap();
    let out = wpiot(dir.path(), &["--config", "over.toml", "allocate"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["path"], "scenario.users");
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = wpiot(dir.path(), &["figure", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig9"));
}

#[test]
fn plan_single_slot_and_stable_cache() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("k1.toml"), "[mdp]\nhorizon = 1\nbattery_levels = 8\n").unwrap();
    let first = stdout_json(&wpiot(dir.path(), &["--config", "k1.toml", "--out", "o", "plan"]));
    assert_eq!(first["cache"], "written");
    let policy = fs::read(dir.path().join("o/policy.csv")).unwrap();
    let text = String::from_utf8(policy.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 8 * 4 * 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("1,")));

    let second = stdout_json(&wpiot(dir.path(), &["--config", "k1.toml", "--out", "o", "plan"]));
    assert_eq!(second["cache"], "unchanged");
    assert_eq!(fs::read(dir.path().join("o/policy.csv")).unwrap(), policy);
}

#[test]
fn reference_plan_reports_state_space() {
    let dir = tempfile::tempdir().unwrap();
    let summary = stdout_json(&wpiot(dir.path(), &["--out", "o", "plan"]));
    assert_eq!(summary["state_space"], 4 * 3 * 64 * 25);
    assert_eq!(summary["states_per_slot"], 4 * 3 * 64);
}

#[test]
fn figure_csvs_have_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    stdout_json(&wpiot(
        dir.path(),
        &["--config", "c.toml", "--out", "o", "figure", "fig3"],
    ));
    let fig3 = fs::read_to_string(dir.path().join("o/fig3.csv")).unwrap();
    assert_eq!(
        fig3.lines().next().unwrap(),
        "n_users,allocator,mean_min_rate_bps,instances"
    );
    assert_eq!(fig3.lines().count(), 1 + 2 * 3);

    stdout_json(&wpiot(
        dir.path(),
        &["--config", "c.toml", "--out", "o", "figure", "fig5"],
    ));
    let fig5 = fs::read_to_string(dir.path().join("o/fig5.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(fig5.as_bytes());
    assert_eq!(
        reader.headers().unwrap(),
        vec!["horizon", "optimal_bits", "offline_bits"]
    );
    let mut horizons = Vec::new();
    for row in reader.records() {
        let row = row.unwrap();
        horizons.push(row[0].parse::<usize>().unwrap());
        for field in [&row[1], &row[2]] {
            let bits: f64 = field.parse().unwrap();
            assert!(bits.is_finite() && bits >= 0.0, "{row:?}");
        }
    }
    assert_eq!(horizons, vec![4, 8]);
    assert!(dir.path().join("o/fig5_manifest.json").exists());
}

#[test]
fn repeated_runs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for (out, threads) in [("a", "1"), ("b", "4")] {
        for cmd in [&["figure", "fig6"][..], &["figure", "fig8"][..], &["simulate"][..]] {
            let mut args = vec!["--config", "c.toml", "--out", out, "--threads", threads];
            args.extend_from_slice(cmd);
            stdout_json(&wpiot(dir.path(), &args));
        }
    }
    for name in [
        "fig6.csv",
        "fig8.csv",
        "simulate.csv",
        "simulate_traces.csv",
        "simulate_manifest.json",
    ] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn manifest_reloads_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    stdout_json(&wpiot(
        dir.path(),
        &[
            "--config",
            "c.toml",
            "--seed",
            "31",
            "--episodes",
            "7",
            "--out",
            "a",
            "simulate",
        ],
    ));
    let first: Value = serde_json::from_slice(&fs::read(dir.path().join("a/simulate_manifest.json")).unwrap()).unwrap();
    assert_eq!(first["config"]["experiment"]["seed"], 31);
    assert_eq!(first["config"]["experiment"]["episodes"], 7);

    stdout_json(&wpiot(
        dir.path(),
        &["--config", "a/simulate_manifest.json", "--out", "b", "simulate"],
    ));
    let second: Value =
        serde_json::from_slice(&fs::read(dir.path().join("b/simulate_manifest.json")).unwrap()).unwrap();
    assert_eq!(first["config"], second["config"]);
    assert_eq!(
        fs::read(dir.path().join("a/simulate.csv")).unwrap(),
        fs::read(dir.path().join("b/simulate.csv")).unwrap()
    );
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = stdout_json(&wpiot(dir.path(), &["selftest"]));
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
}
