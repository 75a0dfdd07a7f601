use sparsefda::cli::{execute, Manifest, RunConfig, StageStatus, COMMANDS, MANIFEST_FILE, PIPELINE_ARTIFACTS};
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_sparsefda");

fn run(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).status().unwrap().code().unwrap()
}

/// Simulated growth cohort written as input files; returns (long, scalars, schema).
fn simulated_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let out = dir.join("sim");
    let code = run(&["simulate", "--scenario", "growth_cohort", "--n-subjects", "150", "--seed", "3", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    (out.join("cohort_long.csv"), out.join("scalars.csv"), out.join("schema.json"))
}

fn small(cfg: RunConfig) -> RunConfig {
    RunConfig {
        bootstrap: 50,
        band_bootstrap: 0,
        seed: Some(1),
        ..cfg
    }
}

#[test]
fn all_subcommands_are_exposed() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    let help = String::from_utf8(out.stdout).unwrap();
    for c in COMMANDS {
        assert!(help.contains(c), "missing subcommand {c}");
    }
}

#[test]
fn pipeline_on_files_lists_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let (long, scalars, schema) = simulated_inputs(dir.path());
    let out = dir.path().join("run");
    let cfg = small(RunConfig {
        input: Some(long),
        scalars: Some(scalars),
        schema: Some(schema),
        outcome: Some("iq".into()),
        output: out.clone(),
        ..RunConfig::default()
    });
    let m = execute("pipeline", &cfg).unwrap();
    assert!(m.all_ok(), "{:?}", m.stages);
    assert_eq!(m.exit_code(), 0);
    let names: Vec<&str> = m.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, PIPELINE_ARTIFACTS);
    assert!(m.qc_report.is_some());
    assert_eq!(Manifest::read(&out).unwrap(), m);
    for a in &m.artifacts {
        assert_eq!(std::fs::read(out.join(&a.name)).unwrap().len(), a.bytes);
    }
}

#[test]
fn missing_scalars_fail_only_dependent_stages() {
    let dir = tempfile::tempdir().unwrap();
    let (long, _, schema) = simulated_inputs(dir.path());
    let out = dir.path().join("run");
    let code = run(&[
        "pipeline", "--input", long.to_str().unwrap(), "--schema", schema.to_str().unwrap(),
        "--outcome", "iq", "--seed", "1", "--bootstrap", "20", "--band-bootstrap", "0",
        "-o", out.to_str().unwrap(),
    ]);
    let m = Manifest::read(&out).unwrap();
    let status = |n: &str| m.stages.iter().find(|s| s.name == n).unwrap().status;
    assert_eq!(status("residualization"), StageStatus::Failed);
    assert_eq!(status("fpca"), StageStatus::Ok);
    assert_eq!(status("correlation_surface"), StageStatus::Ok);
    assert_eq!(status("score_models"), StageStatus::Skipped);
    assert!(out.join("fpca_models.json").exists() && out.join("fve_table.csv").exists());
    assert!(!out.join("coefficients.csv").exists());
    assert_eq!(code, m.exit_code());
    assert_ne!(code, 0);
}

#[test]
fn output_directory_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let base = small(RunConfig {
        scenario: Some("two_component".into()),
        n_subjects: Some(120),
        ..RunConfig::default()
    });
    let a = execute("fpca", &RunConfig { output: dir.path().join("a"), ..base.clone() }).unwrap();
    let b = execute("fpca", &RunConfig { output: dir.path().join("b"), ..base }).unwrap();
    assert_eq!(a, b);
    for art in &a.artifacts {
        assert_eq!(std::fs::read(dir.path().join("a").join(&art.name)).unwrap(), std::fs::read(dir.path().join("b").join(&art.name)).unwrap());
    }
    assert_eq!(std::fs::read(dir.path().join("a").join(MANIFEST_FILE)).unwrap(), std::fs::read(dir.path().join("b").join(MANIFEST_FILE)).unwrap());
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    // no seed for a simulation
    assert_eq!(run(&["simulate", "--scenario", "two_component", "-o", &d("x")]), 2);
    assert!(!dir.path().join("x").exists());
    // input without a schema
    let (long, _, schema) = simulated_inputs(dir.path());
    assert_eq!(run(&["fpca", "--input", long.to_str().unwrap(), "-o", &d("y")]), 2);
    // a required column is missing
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "subject_id,variable,time\nA,head,1\n").unwrap();
    assert_eq!(run(&["ingest", "--input", bad.to_str().unwrap(), "--schema", schema.to_str().unwrap(), "-o", &d("z")]), 3);
    assert!(!dir.path().join("z").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "scenario = \"two_component\"\nn_subjects = 80\nseed = 5\n").unwrap();
    let out = dir.path().join("o");
    let code = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "6", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let m = Manifest::read(&out).unwrap();
    assert_eq!(m.seed, Some(6));
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["scenario"]["n_subjects"], 80);
}

#[test]
fn simulated_schema_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let (long, scalars, schema) = simulated_inputs(dir.path());
    let out = dir.path().join("ing");
    let code = run(&[
        "ingest", "--input", long.to_str().unwrap(), "--scalars", scalars.to_str().unwrap(),
        "--schema", schema.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&long).unwrap(), std::fs::read(out.join("cohort_long.csv")).unwrap());
}
