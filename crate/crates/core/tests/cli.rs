//! The `ctxtune` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn ctxtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxtune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invalid_configuration_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = ctxtune(&["train", "--workers", "1", "--outdir", path(dir.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("population"));
    assert_eq!(code(&ctxtune(&["train", "--env", "cartpole"])), 2);
    assert_eq!(code(&ctxtune(&["frobnicate"])), 2);
}

#[test]
fn missing_files_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(
        code(&ctxtune(&["replay", "--schedules", path(&missing)])),
        3
    );
    assert_eq!(code(&ctxtune(&["eval", "--outdir", path(dir.path())])), 3);
    let csv = dir.path().join("metrics.csv");
    assert_eq!(code(&ctxtune(&["plot", "--input", path(&csv)])), 3);
}

#[test]
fn malformed_metrics_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("metrics.csv");
    std::fs::write(&csv, "step,member,return,lr,wallclock_s\n1,0,x,0.1,0\n").unwrap();
    let out = ctxtune(&["plot", "--input", path(&csv)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn train_replay_eval_plot_flow() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let replay = dir.path().join("replay");
    let out = ctxtune(&[
        "train",
        "--env",
        "pendulum",
        "--visibility",
        "visible",
        "--workers",
        "2",
        "--quantile",
        "0.5",
        "--interval",
        "200",
        "--steps",
        "400",
        "--hidden-width",
        "8",
        "--instances",
        "2",
        "--seed",
        "5",
        "--outdir",
        path(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "metrics.csv",
        "schedules.json",
        "config.json",
        "instances.json",
        "run_meta.json",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }

    let schedules = run.join("schedules.json");
    let out = ctxtune(&[
        "replay",
        "--schedules",
        path(&schedules),
        "--outdir",
        path(&replay),
        "--num-seeds",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_dir(&replay)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .expect("a replay report");

    let out = ctxtune(&[
        "replay",
        "--schedules",
        path(&schedules),
        "--eval-seeds",
        "5",
        "--outdir",
        path(&replay),
    ]);
    assert_eq!(code(&out), 2, "training seed must be refused");

    let out = ctxtune(&["eval", "--outdir", path(&run), "--num-seeds", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("eval.json").exists());

    assert_eq!(code(&ctxtune(&["plot", "--outdir", path(&run)])), 0);
    assert!(run.join("metrics.svg").exists());
    assert_eq!(code(&ctxtune(&["plot", "--input", path(&report)])), 0);
    assert!(report.with_extension("svg").exists());
}
