use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn landing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landing")).args(args).output().unwrap()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn run_writes_artifacts_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "run");
    let o = landing(&["run", "--iters", "12", "--seed", "3", "--target", "-0.2,2.3", "--alpha1", "0.1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("12 iterations"), "{stdout}");
    let run = fs::read_to_string(dir.path().join("run/run.csv")).unwrap();
    assert!(run.starts_with("# seed=3\n"));
    assert_eq!(run.lines().filter(|l| !l.starts_with('#')).count(), 13);
    let echo = fs::read_to_string(dir.path().join("run/config.toml")).unwrap();
    assert!(echo.contains("alpha1 = 0.1"));
    assert!(echo.contains("-0.2"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 8\nn_iters = 4\n[baseline]\ntrials = 10\n").unwrap();
    let out = out_arg(dir.path(), "b");
    let o = landing(&["baseline-variance", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("b/baseline_variance.csv")).unwrap();
    assert!(table.starts_with("# seed=9\n"));
    assert!(table.contains(",10,"));
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "x");
    assert_eq!(landing(&["run", "--alpha1", "-1", "--out", &out]).status.code(), Some(1));
    assert_eq!(landing(&["run", "--target", "1", "--out", &out]).status.code(), Some(1));
    assert_eq!(landing(&["run", "--predictor", "whitebox", "--out", &out]).status.code(), Some(1));
    assert_eq!(landing(&["teleport"]).status.code(), Some(1));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nlearning_rate = 3\n").unwrap();
    let o = landing(&["run", "--config", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
    assert_eq!(landing(&["run", "--config", "/nonexistent/c.toml"]).status.code(), Some(1));
}

#[test]
fn aborted_run_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "max_consecutive_misses = 3\n[phi1]\ntheta1 = 1.5\ntheta4 = 0.0\n").unwrap();
    let out = out_arg(dir.path(), "a");
    let o = landing(&["run", "--config", cfg.to_str().unwrap(), "--iters", "5", "--out", &out]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("aborted"));
}

#[test]
fn help_exits_cleanly() {
    let o = landing(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in ["grad-check", "baseline-variance", "gen-data", "train-blackbox", "run", "sweep"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
