//! End-to-end checks of the `hh-lab` binary: exit codes, artifacts, replay.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hh-lab"));
    c.env_remove("IE_SEED");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(mut c: Command) -> Output {
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn params_prints_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = bin();
    c.args(["params", "--config"]).arg(configs().join("params.json")).arg("--out").arg(dir.path());
    let out = run(c);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("parameter,value"));
    assert!(stdout.lines().any(|l| l == "det.n_phase,7680"), "{stdout}");
    assert!(dir.path().join("params.csv").exists());
}

#[test]
fn missing_prior_file_is_an_infrastructure_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "params", "prior": {"path": "nope.json"}}"#);
    let mut c = bin();
    c.args(["params", "--config"]).arg(&cfg).arg("--out").arg(dir.path());
    assert_eq!(run(c).status.code(), Some(1));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "params", "prior": {"builtin": "micro-det-1"}, "typo": 1}"#);
    let mut c = bin();
    c.args(["params", "--config"]).arg(&cfg).arg("--out").arg(dir.path());
    let out = run(c);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo"));
}

#[test]
fn zero_minimum_reward_violates_an_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind": "det-theorem", "prior": {"inline": {"factored": {
            "S": 1, "A": 2, "H": 1,
            "transition_prior": [{"init": [1], "weight": 1, "transitions": {"1,1,1": [1], "1,2,1": [1]}}],
            "reward_marginals": {"*": [[0, 1]]},
            "reward_family": "deterministic"
        }}}}"#,
    );
    let mut c = bin();
    c.args(["run-det", "--config"]).arg(&cfg).arg("--out").arg(dir.path());
    let out = run(c);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stated_simulation_bound_failure_is_an_assertion_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = bin();
    c.args(["verify", "--suite", "sim-lemma", "--config"])
        .arg(configs().join("sim-lemma.json"))
        .arg("--out")
        .arg(dir.path());
    assert_eq!(run(c).status.code(), Some(3));
    assert!(dir.path().join("sim_lemma.csv").exists());
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let mut c = bin();
    c.args(["run-det", "--seeds", "2..5", "--config"])
        .arg(configs().join("det-theorem.json"))
        .arg("--out")
        .arg(&first);
    assert_eq!(run(c).status.code(), Some(0));
    let seed_dir = first.join("runs").join("seed-000003");
    let original = std::fs::read(seed_dir.join("game.jsonl")).unwrap();

    let second = dir.path().join("second");
    let mut c = bin();
    c.args(["run-det", "--config"]).arg(seed_dir.join("manifest.json")).arg("--out").arg(&second);
    let out = run(c);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let replay = std::fs::read(second.join("runs").join("seed-000003").join("game.jsonl")).unwrap();
    assert_eq!(original, replay);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = bin();
    c.env("IE_SEED", "11")
        .args(["run-det", "--config"])
        .arg(configs().join("det-theorem.json"))
        .arg("--out")
        .arg(dir.path());
    assert_eq!(run(c).status.code(), Some(0));
    let runs: Vec<_> = std::fs::read_dir(dir.path().join("runs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(runs, vec![std::ffi::OsString::from("seed-000011")]);
}
