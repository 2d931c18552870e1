use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn delaybif(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaybif"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("study.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const ALL_OFF: &str = "
[equilibria]
enabled = false
[continuation]
enabled = false
[spectrum]
enabled = false
[critical_delays]
enabled = false
[hopf]
enabled = false
[psol]
enabled = false
[doubling]
enabled = false
[simulate]
enabled = false
";

/// Full bundled study, run once and shared.
fn full_run() -> &'static (TempDir, Output) {
    static RUN: OnceLock<(TempDir, Output)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = delaybif(&["--out", "study"], dir.path());
        (dir, out)
    })
}

fn csv_column(path: &Path, column: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == column).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

#[test]
fn full_study_writes_every_figure_dataset() {
    let (dir, out) = full_run();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let study = dir.path().join("study");
    for file in [
        "branch.csv",
        "switches.csv",
        "spectrum.csv",
        "spectrum/frame_000.csv",
        "critical_delays.csv",
        "hopf.csv",
        "psol_branch.csv",
        "psol2_branch.csv",
        "period_doubling.csv",
        "timeseries_tau_7.1.csv",
        "timeseries_tau_8.6.csv",
        "timeseries_tau_8.78.csv",
        "plots/branch.json",
        "plots/branch_stability.json",
        "plots/psol_branch.json",
        "plots/period_doubling.json",
        "plots/timeseries.json",
        "plots/spectrum.json",
        "summary.json",
        "config.resolved.toml",
    ] {
        assert!(study.join(file).exists(), "missing {file}");
    }
    let hopf = csv_column(&study.join("hopf.csv"), "tau");
    assert_eq!(hopf.len(), 5);
    let pd = csv_column(&study.join("period_doubling.csv"), "tau");
    assert_eq!(pd.len(), 2);
    assert!((pd[0] - 8.464201107682122).abs() < 1e-3);
    // every series in a figure refers to an existing file and column
    for fig in std::fs::read_dir(study.join("plots")).unwrap() {
        let path = fig.unwrap().path();
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for panel in json["panels"].as_array().unwrap() {
            for series in panel["series"].as_array().unwrap() {
                let data = study.join("plots").join(series["data"].as_str().unwrap());
                for key in ["x", "y"] {
                    let col = series[key].as_str().unwrap();
                    assert!(!csv_column(&data, col).is_empty(), "{} {col}", data.display());
                }
            }
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (dir, first) = full_run();
    assert!(first.status.success());
    let again = delaybif(&["--out", "again"], dir.path());
    assert!(again.status.success());
    let a = dir.path().join("study");
    let b = dir.path().join("again");
    let mut compared = 0;
    for entry in walk(&a) {
        let rel = entry.strip_prefix(&a).unwrap();
        if rel.extension().is_some_and(|e| e == "csv") {
            assert_eq!(std::fs::read(&entry).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{}", rel.display());
            compared += 1;
        }
    }
    assert!(compared > 70, "{compared} files compared");
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files.sort();
    files
}

#[test]
fn report_matrix_after_full_run() {
    let (dir, first) = full_run();
    assert!(first.status.success());
    let out = delaybif(&["--out", "study", "report"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    let failing: Vec<&str> = text
        .lines()
        .filter(|l| l.ends_with("FAIL"))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert!(text.contains("rows pass"));
    assert_eq!(text.lines().filter(|l| l.ends_with("PASS") || l.ends_with("FAIL")).count(), 36);
    // the two doubling delays that cannot be met at their stated tolerances
    assert_eq!(failing, ["period_doubling[1].localized", "period_doubling[2]"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("study/tolerance_report.csv").exists());
}

#[test]
fn all_stages_off_writes_only_the_config_echo() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), ALL_OFF);
    let out = delaybif(&["--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(dir.path().join("o")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, ["config.resolved.toml"]);
}

#[test]
fn invalid_bounds_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[continuation]\nmin_bound = 10.0\nmax_bound = 1.0\n");
    let out = delaybif(&["--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("continuation.max_bound"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_key_and_stage_are_validation_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\ntau = 1.0\n");
    let out = delaybif(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulate.tau"));
    let out = delaybif(&["--out", "o", "--stage", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn critical_delays_reproduce_the_table() {
    let dir = TempDir::new().unwrap();
    let out = delaybif(&["--out", "o", "critical-delays"], dir.path());
    assert!(out.status.success());
    let file = dir.path().join("o/critical_delays.csv");
    let minus = csv_column(&file, "tau_minus");
    let plus = csv_column(&file, "tau_plus");
    let want_minus = [-1.752556, 5.393140, 12.538836, 19.684531, 26.830227];
    let want_plus = [1.3794139, 6.9810371, 12.582660, 18.184284, 23.785907];
    for k in 0..5 {
        assert!((minus[k] - want_minus[k]).abs() < 1e-5);
        assert!((plus[k] - want_plus[k]).abs() < 1e-5);
    }
}

#[test]
fn simulate_at_period_four_delay() {
    let dir = TempDir::new().unwrap();
    let out = delaybif(&["--out", "o", "simulate", "--tau", "8.78"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("tau 8.78: multiplicity 4"), "{stdout}");
    let text = std::fs::read_to_string(dir.path().join("o/attractor_tau_8.78.txt")).unwrap();
    assert!(text.contains("multiplicity 4"));
    assert_eq!(text.lines().filter(|l| l.starts_with("peak")).count(), 4);
    let t = csv_column(&dir.path().join("o/timeseries_tau_8.78.csv"), "t");
    assert_eq!(t.last().copied(), Some(1000.0));
}

#[test]
fn stages_chain_through_saved_state() {
    let dir = TempDir::new().unwrap();
    let missing = delaybif(&["--out", "o", "hopf"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("branch"));
    assert!(delaybif(&["--out", "o", "continue"], dir.path()).status.success());
    assert!(delaybif(&["--out", "o", "hopf"], dir.path()).status.success());
    let taus = csv_column(&dir.path().join("o/hopf.csv"), "tau");
    assert!((taus[4] - 12.582660362074412).abs() < 1e-8);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], serde_json::json!(["continue", "hopf"]));
}

#[test]
fn numerical_failure_keeps_partial_artifacts() {
    let dir = TempDir::new().unwrap();
    let text = format!("{}\n", ALL_OFF)
        .replace("[continuation]\nenabled = false", "[continuation]\nenabled = true")
        .replace("[hopf]\nenabled = false", "[hopf]\nenabled = true")
        .replace("[psol]\nenabled = false", "[psol]\nenabled = true\ntol = 1e-300");
    let cfg = write_config(dir.path(), &text);
    let out = delaybif(&["--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `psol` failed"));
    assert!(dir.path().join("o/branch.csv").exists());
    assert!(dir.path().join("o/hopf.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failed_stage"], "psol");
    assert_eq!(summary["completed"], serde_json::json!(["continue", "hopf"]));
}

#[test]
fn stage_flag_stops_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = delaybif(&["--out", "o", "--stage", "critical-delays"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("o/critical_delays.csv").exists());
    assert!(!dir.path().join("o/hopf.csv").exists());
}
