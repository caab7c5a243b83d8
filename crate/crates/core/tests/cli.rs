mod common;

use std::path::Path;
use std::process::Command;

use mbd2sdf::cli::run;
use mbd2sdf::interpreter::{compare_traces, Trace};
use mbd2sdf::model::load_model;

fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Runs the front end in process and returns (exit code, stdout, stderr).
fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mbd2sdf").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn check_exit_codes() {
    let (code, out, _) = cli(&["check", &fixture_path("academic.json")]);
    assert_eq!(code, 0, "{out}");
    let (code, out, _) = cli(&["check", &fixture_path("validator/routing_fail.json")]);
    assert_eq!(code, 1);
    assert!(out.starts_with("DanglingRouting Tx "), "{out}");
    let (code, out, _) = cli(&["check", "--json", &fixture_path("validator/routing_fail.json")]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["rule"], "DanglingRouting");
    assert_eq!(v[0]["location"], "Tx");
}

#[test]
fn usage_and_io_errors_exit_two() {
    let (code, _, err) = cli(&["check", "/nonexistent/model.json"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[io]:"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": 1}").unwrap();
    let (code, _, err) = cli(&["verify", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[load]:"), "{err}");
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["verify", &fixture_path("tcu.json"), "--tol", "-1"]).0, 2);
    assert_eq!(cli(&["verify", &fixture_path("tcu.json"), "--depth", "deep"]).0, 2);
}

#[test]
fn translate_refuses_unclean_model() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&[
        "translate",
        &fixture_path("validator/harmonic_fail.json"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[check]:") && err.contains("HarmonicRates"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

fn translate_into(model: &str, dir: &Path) -> String {
    let (code, out, err) = cli(&["translate", model, "--out", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn translate_writes_reloadable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = translate_into(&fixture_path("academic.json"), dir.path());
    assert!(out.starts_with("8 actors, 7 channels"), "{out}");
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    let normalized = load_model(&read("academic.normalized.json")).unwrap();
    assert!(normalized.blocks().iter().any(|b| b.kind.is_rate_transition()));
    let graph: serde_json::Value = serde_json::from_str(&read("academic.sdfg.json")).unwrap();
    assert_eq!(graph["actors"].as_array().unwrap().len(), 8);
    let report: serde_json::Value = serde_json::from_str(&read("academic.report.json")).unwrap();
    assert_eq!(report["actors"], 8);
    assert!(read("academic.dot").starts_with("digraph \"academic\""));
}

#[test]
fn random_corpus_artifacts_reload() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..12 {
        let m = common::random::random_model_json(seed, 3);
        let path = dir.path().join(format!("m{seed}.json"));
        std::fs::write(&path, &m).unwrap();
        let out = dir.path().join(format!("out{seed}"));
        translate_into(path.to_str().unwrap(), &out);
        let text = std::fs::read_to_string(out.join(format!("rnd{seed}.normalized.json"))).unwrap();
        let normalized = load_model(&text).unwrap();
        let again = mbd2sdf::normalizer::normalize(&normalized, mbd2sdf::normalizer::Depth::Full).unwrap();
        assert_eq!(again.model, normalized, "seed {seed}: normalization is idempotent");
    }
}

#[test]
fn schedule_json() {
    let (code, out, _) = cli(&["schedule", "--json", &fixture_path("academic.json")]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["repetition"]["Product"], 2);
    assert_eq!(v["iteration_steps"], 4);
    assert_eq!(v["schedule"].as_array().unwrap().len(), 11);
}

#[test]
fn verify_matches_manual_chaining() {
    let model = fixture_path("tcu.json");
    let (code, out, _) = cli(&["verify", &model, "--steps", "200"]);
    assert_eq!(code, 0, "{out}");
    let (_, mil, _) = cli(&["simulate-mil", &model, "--steps", "200"]);
    let (_, sil, _) = cli(&["simulate-sil", &model, "--steps", "200"]);
    let r = compare_traces(&Trace::from_csv(&mil).unwrap(), &Trace::from_csv(&sil).unwrap(), 1e-12).unwrap();
    assert!(r.pass);
    assert_eq!(out, format!("mil-vs-sil: pass ({} samples)\n", r.samples));
}

#[test]
fn verify_reports_golden_divergence() {
    let model = fixture_path("climate.json");
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden.csv");
    let (_, sil, _) = cli(&["simulate-sil", &model, "--steps", "50"]);
    std::fs::write(&golden, &sil).unwrap();
    let g = golden.to_str().unwrap();
    assert_eq!(cli(&["verify", &model, "--steps", "50", "--golden", g]).0, 0);

    let mut lines: Vec<String> = sil.lines().map(str::to_string).collect();
    let row = lines.iter().position(|l| l.starts_with("10,EnergyOut,")).unwrap();
    lines[row] = "10,EnergyOut,123.5".to_string();
    std::fs::write(&golden, lines.join("\n") + "\n").unwrap();
    let (code, out, _) = cli(&["verify", &model, "--steps", "50", "--golden", g]);
    assert_eq!(code, 1);
    assert!(out.contains("golden-vs-sil: FAIL at EnergyOut t=10 element 0: 123.5 vs"), "{out}");
    let (code, out, _) = cli(&["verify", &model, "--steps", "50", "--golden", g, "--json"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn verify_zero_steps_passes() {
    let (code, out, _) = cli(&["verify", &fixture_path("climate.json"), "--steps", "0"]);
    assert_eq!(code, 0);
    assert_eq!(out, "mil-vs-sil: pass (0 samples)\n");
}

#[test]
fn periods_flag_counts_iterations() {
    let (_, a, _) = cli(&["simulate-sil", &fixture_path("academic.json"), "--periods", "3"]);
    let (_, b, _) = cli(&["simulate-sil", &fixture_path("academic.json"), "--steps", "12"]);
    assert_eq!(a, b);
    assert_eq!(Trace::from_csv(&a).unwrap().sample_count(), 6);
}

#[test]
fn codegen_manifest_and_build() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture_path("climate.json");
    let (code, out, err) = cli(&["codegen", &model, "--out", dir.path().to_str().unwrap(), "--steps", "120"]);
    assert_eq!(code, 0, "{err}");
    let files: Vec<&str> = out.lines().map(|l| l.rsplit('/').next().unwrap()).collect();
    for f in ["sdfg_climate.c", "sdfg_climate.h", "actors_climate.c", "harness_climate.c", "sdf_queue.c"] {
        assert!(files.contains(&f), "{out}");
    }
    let exe = dir.path().join("h");
    let cc = Command::new(common::cc::compiler())
        .current_dir(dir.path())
        .args(["-std=c99", "-ffp-contract=off", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .args(["sdfg_climate.c", "actors_climate.c", "harness_climate.c", "runtime/sdf_queue.c", "-lm"])
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let native = String::from_utf8(Command::new(&exe).output().unwrap().stdout).unwrap();
    let (_, sil, _) = cli(&["simulate-sil", &model, "--steps", "120"]);
    let r = compare_traces(&Trace::from_csv(&sil).unwrap(), &Trace::from_csv(&native).unwrap(), 0.0).unwrap();
    assert!(r.pass, "{:?}", r.first_divergence);
    assert_eq!(native.lines().count(), sil.lines().count());
}

#[test]
fn export_dot_is_stable() {
    let a = cli(&["export-dot", &fixture_path("tcu.json")]);
    let b = cli(&["export-dot", &fixture_path("tcu.json")]);
    assert_eq!(a, b);
    assert_eq!(a.0, 0);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mbd2sdf");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["check", &fixture_path("tcu.json")]), Some(0));
    assert_eq!(status(&["check", &fixture_path("validator/bus_fail.json")]), Some(1));
    assert_eq!(status(&["check"]), Some(2));
    assert_eq!(status(&["--help"]), Some(0));
}

#[test]
fn empty_model_codegen_compiles() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("empty.json");
    std::fs::write(
        &model,
        r#"{"name": "empty", "base_step": {"num": 1, "den": 1},
            "root": {"id": "root", "kind": "Subsystem", "children": []}}"#,
    )
    .unwrap();
    let out = dir.path().join("gen");
    let (code, _, err) = cli(&["codegen", model.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let exe = out.join("h");
    let cc = Command::new(common::cc::compiler())
        .current_dir(&out)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .args(["sdfg_empty.c", "actors_empty.c", "harness_empty.c", "runtime/sdf_queue.c", "-lm"])
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(String::from_utf8(run.stdout).unwrap(), "time,signal,value\n");
}
