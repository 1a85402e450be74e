//! Runs the `hredlsh` binary against fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn toy_config() -> PathBuf {
    fixture("toy/toy.conf")
}

pub fn run(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hredlsh"))
        .arg("--workdir")
        .arg(workdir)
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs and panics with the diagnostic on failure.
pub fn ok(workdir: &Path, args: &[&str]) -> String {
    let o = run(workdir, args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

/// Runs, expects failure, and returns the single diagnostic line.
pub fn fails(workdir: &Path, args: &[&str]) -> String {
    let o = run(workdir, args);
    assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "expected one diagnostic line, got {err:?}");
    assert!(lines[0].starts_with("error: "), "{err}");
    lines[0].to_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("UTF-8 path")
}

/// `key=value` pairs of a recall report file.
pub fn read_kv(path: &Path) -> std::collections::BTreeMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_owned(), v.to_owned())))
        .collect()
}
