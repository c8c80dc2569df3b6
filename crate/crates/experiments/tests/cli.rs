use std::path::Path;
use std::process::Command;

fn wpfl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wpfl")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"{
  "base": { "system": { "n": 3 } },
  "sweep": { "variable": "P0_dBm", "grid": [40, 42] },
  "schemes": ["S2FL", "FTD"],
  "realizations": 2
}"#;

#[test]
fn run_writes_the_table_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("t.csv");
    let o = wpfl(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
    let again = wpfl(&["run", "--config", &config]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn mode_flag_switches_the_uplink() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL);
    let fdma = wpfl(&["run", "--config", &config, "--mode", "fdma"]).stdout;
    let noma = wpfl(&["run", "--config", &config, "--mode", "noma"]).stdout;
    assert_ne!(fdma, noma);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"sweep": {"variable": "B", "grid": []}, "schemes": ["S2FL"]}"#);
    assert_eq!(wpfl(&["validate-config", "--config", &bad]).status.code(), Some(1));
    assert_eq!(wpfl(&["run", "--config", &bad]).status.code(), Some(1));
    assert_eq!(wpfl(&["run", "--config", "/nonexistent.json"]).status.code(), Some(1));
    let good = write(dir.path(), "good.json", SMALL);
    let o = wpfl(&["validate-config", "--config", &good]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("8 runs"));
}

#[test]
fn failed_runs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "c.json",
        r#"{"base": {"system": {"n": 2, "e_max": 0}}, "sweep": {"variable": "N", "grid": [2]}, "schemes": ["S2FL"], "realizations": 1}"#,
    );
    let o = wpfl(&["run", "--config", &config]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stdout).unwrap().lines().last().unwrap().ends_with(",0,1"));
}

#[test]
fn saved_instances_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL);
    let o = wpfl(&["instance", "--config", &config, "--point", "1", "--realization", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let instance = write(dir.path(), "i.json", &String::from_utf8(o.stdout).unwrap());
    let o = wpfl(&["replay", "--instance", &instance, "--scheme", "FTD"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("k,objective,eta"));
    let o = wpfl(&["replay", "--instance", &instance, "--format", "json"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("\"iterations\""));
    let junk = write(dir.path(), "junk.json", "{}");
    assert_eq!(wpfl(&["replay", "--instance", &junk]).status.code(), Some(1));
}
