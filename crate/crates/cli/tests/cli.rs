//! End-to-end checks of the `ursim` binary: exit codes, export/report
//! round trip, and the one-line diagnostic contract.

use std::path::PathBuf;
use std::process::Command;

fn ursim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ursim"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ursim-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_and_report_round_trip() {
    let dir = temp_dir("roundtrip");
    let scenario = dir.join("scenario.toml");
    std::fs::write(
        &scenario,
        "distances = [3, 7]\nsnr_points = [30.0]\ntrials_per_point = 2\n",
    )
    .unwrap();
    let out = dir.join("records.csv");

    let run = ursim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "1"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("wrote 8 records"), "{stdout}");

    let report = ursim()
        .args(["report", "--in"])
        .arg(&out)
        .args(["--group-by", "estimator", "--percentiles", "50,90"])
        .output()
        .unwrap();
    assert!(report.status.success());
    let table = String::from_utf8_lossy(&report.stdout);
    assert!(table.contains("estimator=pd"), "{table}");
    assert!(table.contains("estimator=mf"), "{table}");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_override_changes_records() {
    let dir = temp_dir("seed");
    let scenario = dir.join("scenario.toml");
    std::fs::write(
        &scenario,
        "distances = [5]\nsnr_points = [0.0]\ntrials_per_point = 1\nestimators = [\"pd\"]\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.join(format!("records-{seed}.csv"));
        let run = ursim()
            .args(["run", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .args(["--seed", seed, "--threads", "1"])
            .output()
            .unwrap();
        assert!(run.status.success());
        outputs.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_ne!(outputs[0], outputs[1], "different seeds, same records");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_scenario_fails_with_diagnostic() {
    let dir = temp_dir("invalid");
    let scenario = dir.join("bad.toml");
    std::fs::write(&scenario, "[ofdm]\nsample_rate_hz = 40e6\n").unwrap();
    let run = ursim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.join("never.csv"))
        .output()
        .unwrap();
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("inconsistent"), "{stderr}");
    assert!(!dir.join("never.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_input_fails() {
    let run = ursim()
        .args(["report", "--in", "/nonexistent/records.csv"])
        .output()
        .unwrap();
    assert!(!run.status.success());
    assert!(!run.stderr.is_empty());
}
