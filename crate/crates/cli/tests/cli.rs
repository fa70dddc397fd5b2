use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_barrier-qmc"));
    cmd.env_remove("BARRIER_QMC_WORKERS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let line = err.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

#[test]
fn gap_scan_single_size_prints_profile() {
    let o = run(&["gap-scan", "--alpha", "0.3", "--c", "1", "--n", "104"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# n=104,alpha=0.3,c=1"));
    assert_eq!(lines.next().unwrap(), "s,ground_energy,gap");
    assert_eq!(lines.count(), 1001);
}

#[test]
fn empty_range_is_a_machine_readable_error() {
    let o = run(&["gap-scan", "--alpha", "0.3", "--c", "1", "--n-min", "101", "--n-max", "103"]);
    assert!(!o.status.success());
    let e = error_line(&o);
    assert_eq!(e["error"], "empty_size_range");
    assert!(e["message"].as_str().unwrap().contains("101..=103"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let o = run(&["gap-scan", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "usage");

    let o = run(&["qmc-run", "--alpha", "0.3", "--c", "1", "--n", "102"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "invalid_instance");
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.cfg");
    write(&cfg, "alpha=0.3\nc=1\nn=104\ncoarse-step=0.01\n");
    let out = dir.path().join("out.csv");
    let o = run(&[
        "gap-scan",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "116",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# n=116,alpha=0.3,c=1"));
    // the coarse step from the file still applies
    assert_eq!(text.lines().count(), 2 + 101);
}

#[test]
fn config_for_another_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("x.cfg");
    write(&cfg, "mode=correlate\nalpha=0.3\nc=1\n");
    let o = run(&["gap-scan", "--config", cfg.to_str().unwrap(), "--n", "104"]);
    assert_eq!(error_line(&o)["error"], "config");
}

fn tiny_curve(extra: &[&str], env_workers: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args([
        "sweep-curve",
        "--alpha",
        "0.3",
        "--c",
        "1",
        "--n",
        "16",
        "--replicas",
        "3",
        "--seed",
        "5",
        "--set",
        "delta-s=0.05",
        "--set",
        "window=20",
    ])
    .args(extra);
    if let Some(w) = env_workers {
        cmd.env("BARRIER_QMC_WORKERS", w);
    }
    cmd.output().unwrap()
}

#[test]
fn reruns_are_byte_identical_across_worker_settings() {
    let a = tiny_curve(&[], None);
    let b = tiny_curve(&["--workers", "1"], Some("3"));
    let c = tiny_curve(&[], Some("2"));
    assert!(a.status.success(), "{a:?}");
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert!(stdout(&a).starts_with("# mode=sweep-curve,n=16,alpha=0.3,c=1,beta=32,T=64,seed=5,replicas=3"));
}

#[test]
fn bad_worker_env_is_reported() {
    let o = tiny_curve(&[], Some("many"));
    assert_eq!(error_line(&o)["error"], "config");
    // an explicit flag makes the variable irrelevant
    let o = tiny_curve(&["--workers", "1"], Some("many"));
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn help_lists_every_mode() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for m in ["gap-scan", "gap-scaling", "qmc-run", "sweep-curve", "correlate"] {
        assert!(text.contains(m), "{m} missing from help");
    }
}
