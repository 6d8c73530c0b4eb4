//! The `groupnas` binary: subcommands and exit statuses.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn groupnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupnas"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "space": {"num_tasks": 3, "num_nodes": 1},
    "surrogate": {"hidden_dim": 4},
    "train": {"epochs_per_update": 5},
    "sampler": {"warm_start_size": 3, "archs_per_combination": 4, "top_archs": 2, "rounds": 2},
    "derivation": {"budget": 2, "iterations": 50, "restarts": 2}
}"#;

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let run = tmp.path().join("run");
    let (c, r) = (config.to_str().unwrap(), run.to_str().unwrap());

    let out = groupnas(&["search", "--config", c, "--seed", "3", "--out", r]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("round"));

    let out = groupnas(&["derive", "--out", r]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("budget 2\n"));

    let out = groupnas(&["evaluate", "--out", r]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("realized_gain "));

    let summary = tmp.path().join("summary");
    let out = groupnas(&["report", "--out", summary.to_str().unwrap(), r]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(summary.join("summary.md").exists());

    let out = groupnas(&["search", "--resume", "--out", r]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), r#"{"sampler": {"top_archs": 0}}"#);
    let run = tmp.path().join("run");
    let out = groupnas(&[
        "search",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    let out = groupnas(&["search", "--variant", "greedy", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let out = groupnas(&["derive", "--seed", "1", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    // Output directory already holds a run.
    let good = write_config(tmp.path(), SMALL);
    let args = [
        "search",
        "--config",
        good.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ];
    assert_eq!(code(&groupnas(&args)), 0);
    assert_eq!(code(&groupnas(&args)), 2);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&groupnas(&forced)), 0);
}

#[test]
fn evaluator_failures_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let run = tmp.path().join("run");
    let out = groupnas(&[
        "search",
        "--config",
        config.to_str().unwrap(),
        "--evaluator",
        "external:exit 0",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn enumeration_guard_exits_with_4() {
    let out = groupnas(&["bruteforce"]);
    assert_eq!(code(&out), 0, "task5 profile is small enough");
    let tmp = tempfile::tempdir().unwrap();
    let big = write_config(tmp.path(), r#"{"defaults_profile": "task25"}"#);
    let out = groupnas(&["bruteforce", "--config", big.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn damaged_checkpoint_exits_with_5() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let run = tmp.path().join("run");
    let r = run.to_str().unwrap();
    assert_eq!(
        code(&groupnas(&["search", "--config", config.to_str().unwrap(), "--out", r])),
        0
    );
    for entry in fs::read_dir(&run).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap().to_string_lossy().starts_with("surrogate-r") {
            fs::write(path.join("surrogate.bin"), b"truncated").unwrap();
        }
    }
    assert_eq!(code(&groupnas(&["derive", "--out", r])), 5);
}

#[test]
fn bruteforce_writes_the_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("bf");
    let out = groupnas(&[
        "bruteforce",
        "--config",
        write_config(tmp.path(), r#"{"space": {"num_tasks": 6, "num_nodes": 2}}"#)
            .to_str()
            .unwrap(),
        "--budget",
        "6",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(out_dir.join("optimum.txt")).unwrap();
    assert!(
        text.starts_with("points 7875\nbudget 6\npredicted_gain 0.06192261146988005\n"),
        "{text}"
    );
}
