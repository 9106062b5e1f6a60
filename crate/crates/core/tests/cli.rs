use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[problem]
name = "cole-hopf"
K = 5
T = 1

[grid]
x_min = -6
x_max = 11
h = 0.05

[scheme]
delta = 0.25
delta_list = 0.25, 0.125
probe = 0, 5
"#;

fn splitsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitsolve"))
        .args(args)
        .env_remove("SPLITSOLVE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn selftest_passes() {
    let out = splitsolve(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 9);
    assert!(text.contains("9 of 9 suites passed"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(splitsolve(&[]).status.code(), Some(2));
    assert_eq!(splitsolve(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(splitsolve(&["solve"]).status.code(), Some(2));
    assert_eq!(splitsolve(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_is_a_runtime_error() {
    let out = splitsolve(&["solve", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scheme]\ndelta = 0.3\n");
    let out = splitsolve(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("does not divide horizon"), "{err}");

    let cfg = write_config(dir.path(), "[grid]\nspacing = 0.1\n");
    let err = stderr(&splitsolve(&["solve", "--config", &cfg]));
    assert!(err.contains("[grid] spacing"), "{err}");

    let cfg = write_config(dir.path(), "[grid]\nh = -1\n");
    let err = stderr(&splitsolve(&["solve", "--config", &cfg]));
    assert!(err.contains("[grid] h"), "{err}");
}

#[test]
fn solve_exports_layers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("layers");
    let out = splitsolve(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("u(0, 5) = 4.3"), "{text}");
    assert!(text.contains("exact      = 4.3649410924"), "{text}");

    let manifest = fs::read_to_string(out_dir.join("layers.csv")).unwrap();
    let rows: Vec<&str> = manifest.lines().collect();
    assert_eq!(rows[0], "j,t,file");
    assert_eq!(rows.len(), 6);
    for row in &rows[1..] {
        let file = row.rsplit(',').next().unwrap();
        let body = fs::read_to_string(out_dir.join(file)).unwrap();
        assert_eq!(body.lines().count(), 1 + 341);
    }
    assert!(out_dir.join("solution.svg").exists());
}

#[test]
fn howard_solve_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("fd");
    let out = splitsolve(&[
        "solve",
        "--howard",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("howard solve"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let out = splitsolve(&["solve", "--config", &cfg, "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("I/O error"), "{}", stderr(&out));
}

#[test]
fn convergence_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("conv");
    let out = splitsolve(&[
        "convergence",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("reference (exact)"));
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert!(
        csv.starts_with("delta,value,abs_error,rel_error,seconds"),
        "{csv}"
    );
    assert!(out_dir.join("convergence.svg").exists());
}

#[test]
fn compare_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("cmp");
    let out = splitsolve(&[
        "--threads",
        "1",
        "compare",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cmp = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 3, "{cmp}");
    let conv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 1 + 2 * 2, "{conv}");
}
