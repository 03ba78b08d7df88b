use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steiner-search"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn total_loss(out: &Path) -> f64 {
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    summary["total_loss"]["mean"].as_f64().unwrap()
}

#[test]
fn midpoint_on_cycling_basis_in_one_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        &[
            "--learner",
            "midpoint",
            "--adversary",
            "cycling_basis",
            "--d",
            "1",
            "--T",
            "30",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(total_loss(dir.path()) <= 4.0);
}

#[test]
fn zero_horizon_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["--T", "0", "--seeds", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace_seed3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert_eq!(total_loss(dir.path()), 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--learner",
        "steiner_pricing",
        "--loss",
        "pricing",
        "--d",
        "3",
        "--T",
        "40",
        "--seeds",
        "0..3",
        "--mc-samples",
        "512",
    ];
    let read = || {
        ["trace_seed0.csv", "trace_seed2.csv", "summary.json"]
            .map(|f| fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(cli(&args, dir.path()).status.code(), Some(0));
    let first = read();
    assert_eq!(cli(&args, dir.path()).status.code(), Some(0));
    assert_eq!(first, read());
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--learner", "oracle"][..],
        &["--d", "0"],
        &["--p", "0.6"],
        &["--seeds", "4..4"],
        &[
            "--learner",
            "noisy_single_scale",
            "--p",
            "0.4",
            "--pprime",
            "0.3",
        ],
        &["--check", "nothing"],
    ] {
        assert_eq!(cli(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"horizon": 10}"#).unwrap();
    let o = cli(&["--config", config.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["--T", "5"], dir.path()).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace_seed0.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,y,u,sigma_sent,sigma_recv,loss,cum_loss,scale,potential"
    );
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"learner": "midpoint", "d": 2, "T": 50, "seeds": [4]}"#,
    )
    .unwrap();
    let o = cli(
        &["--config", config.to_str().unwrap(), "--T", "7"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace_seed4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(dir.path().join("runtime.json").exists());
}

#[test]
fn check_suite_reports_each_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["--check", "noisy_identities"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 3);
    assert!(text.contains("0 failed"));
}
