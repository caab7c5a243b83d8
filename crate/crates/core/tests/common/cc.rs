//! Compiles a generated bundle with the system C compiler and runs it.

use std::path::Path;
use std::process::Command;

use mbd2sdf::codegen::SourceBundle;

pub fn compiler() -> String {
    std::env::var("CC").unwrap_or_else(|_| "cc".to_string())
}

/// Builds `bundle` plus `harness` inside `dir` and returns the program's stdout.
pub fn build_and_run(bundle: &SourceBundle, harness: &(String, String), dir: &Path, extra: &[&str]) -> String {
    let mut b = bundle.clone();
    b.files.insert(harness.0.clone(), harness.1.clone());
    b.write_to(dir).expect("write bundle");
    let exe = dir.join("harness");
    let mut cmd = Command::new(compiler());
    cmd.current_dir(dir)
        .args(["-std=c99", "-O1", "-ffp-contract=off", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .args(extra)
        .args(b.sources())
        .arg("-lm");
    let out = cmd.output().expect("run C compiler");
    assert!(
        out.status.success(),
        "C compile failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().expect("run harness");
    assert!(run.status.success(), "harness failed: {}", String::from_utf8_lossy(&run.stderr));
    String::from_utf8(run.stdout).expect("utf8 output")
}
