use std::path::Path;
use std::process::{Command, Output};

fn mvgcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvgcn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mvgcn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(mvgcn(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mvgcn(&["export-heatmap"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "bogus_key = 1\n").unwrap();
    let out = mvgcn(&["--config", conf.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("code=3"));
    assert_eq!(mvgcn(&["--set", "lr=-1", "train"]).status.code(), Some(3));
    assert_eq!(mvgcn(&["synth", "--out", dir.path().to_str().unwrap(), "--weeks", "3"]).status.code(), Some(3));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let work = format!("work_dir={}", dir.path().display());
    assert_eq!(mvgcn(&["--set", &work, "train"]).status.code(), Some(1));
}

#[test]
fn synthetic_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["synth", "--out", d, "--n", "6", "--weeks", "10", "--seed", "5"]);
    let conf = Path::new(d).join("run.conf");
    let conf = conf.to_str().unwrap();
    let common = ["--config", conf, "--set", "max_epochs=2", "--set", "hidden=8", "--print"];
    let run = |cmd: &[&str]| ok(&[&common[..], cmd].concat());
    assert!(run(&["build-graph"]).contains("regions=6"));
    assert!(run(&["prepare"]).contains("test=672"));
    assert!(run(&["train"]).contains("epochs=2"));
    run(&["predict"]);
    let summary = run(&["evaluate"]);
    assert!(summary.contains("MVGCN") && summary.contains("HA"), "{summary}");
    run(&["export-heatmap", "--t", "1600"]);
    let heat = std::fs::read_to_string(Path::new(d).join("heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 1 + 6);
    let out = mvgcn(&[&common[..], &["export-heatmap", "--t", "5"]].concat());
    assert_eq!(out.status.code(), Some(1));
}
