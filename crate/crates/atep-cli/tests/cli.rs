//! End-to-end tests of the `atep` binary: run, resume, export, and
//! eval-generalization, exercised through the real process boundary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn atep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_atep"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("atep-cli-{}-{name}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    dir
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Fast run settings shared by the tests below.
fn fast_args(seed: u64, iters: u64) -> Vec<String> {
    [
        format!("seed={seed}"),
        format!("iterations={iters}"),
        "neat.pop_size=10".into(),
        "poet.max_active=2".into(),
        "schedule.n_reproduce_iters=5".into(),
        "schedule.n_transfer_iters=5".into(),
        "poet.mc_lo=0".into(),
        "poet.mc_hi=320".into(),
        "checkpoint.every_iters=5".into(),
    ]
    .iter()
    .flat_map(|kv| ["--set".to_string(), kv.clone()])
    .collect()
}

fn run_to(dir: &Path, seed: u64, iters: u64) {
    let out = atep()
        .arg("run")
        .args(fast_args(seed, iters))
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
}

#[test]
fn zero_budget_run_leaves_config_echo_and_empty_ledger() {
    let dir = tmp("zero");
    let out = atep()
        .arg("run")
        .args(fast_args(1, 0))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let config = fs::read_to_string(dir.join("config.txt")).unwrap();
    assert!(config.contains("seed = 1"));
    assert!(config.contains("sim.dt_s = 0.05"));
    let ledger = fs::read_to_string(dir.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 1, "header only");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_key_is_a_named_error() {
    let out = atep()
        .arg("run")
        .args(["--set", "neat.popsize=10"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("neat.popsize"),
        "diagnostic must name the key: {}",
        stderr_of(&out)
    );
}

#[test]
fn same_config_and_seed_give_identical_ledgers() {
    let (d1, d2) = (tmp("det1"), tmp("det2"));
    run_to(&d1, 11, 12);
    run_to(&d2, 11, 12);
    assert_eq!(
        fs::read(d1.join("ledger.csv")).unwrap(),
        fs::read(d2.join("ledger.csv")).unwrap()
    );
    fs::remove_dir_all(&d1).ok();
    fs::remove_dir_all(&d2).ok();
}

#[test]
fn resume_continues_exactly_and_zero_extra_is_a_noop() {
    let (full, split) = (tmp("full"), tmp("split"));
    run_to(&full, 21, 10);
    run_to(&split, 21, 5);
    let out = atep()
        .arg("resume")
        .arg("--checkpoint")
        .arg(split.join("checkpoints/iter-000005"))
        .args(["--iters", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert_eq!(
        fs::read(full.join("ledger.csv")).unwrap(),
        fs::read(split.join("ledger.csv")).unwrap()
    );

    // Resuming a finished run with zero extra iterations is a no-op.
    let before = fs::read(split.join("ledger.csv")).unwrap();
    let out = atep()
        .arg("resume")
        .arg("--checkpoint")
        .arg(split.join("checkpoints/final"))
        .args(["--iters", "0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(before, fs::read(split.join("ledger.csv")).unwrap());
    fs::remove_dir_all(&full).ok();
    fs::remove_dir_all(&split).ok();
}

#[test]
fn resume_refuses_modified_config_without_override() {
    let dir = tmp("refuse");
    run_to(&dir, 31, 5);
    let mut config = fs::read_to_string(dir.join("config.txt")).unwrap();
    config = config.replace("neat.weight_sigma = 0.5", "neat.weight_sigma = 0.9");
    let modified = dir.join("modified.txt");
    fs::write(&modified, config).unwrap();

    let out = atep()
        .arg("resume")
        .arg("--checkpoint")
        .arg(dir.join("checkpoints/final"))
        .args(["--iters", "1"])
        .arg("--config")
        .arg(&modified)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("config hash mismatch"));

    let out = atep()
        .arg("resume")
        .arg("--checkpoint")
        .arg(dir.join("checkpoints/final"))
        .args(["--iters", "1"])
        .arg("--config")
        .arg(&modified)
        .arg("--override-config")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn export_series_and_unknown_series_diagnostic() {
    let dir = tmp("export");
    run_to(&dir, 41, 8);

    for what in ["annecs", "nodes", "func-evals", "fnr", "anr", "terrain", "actions"] {
        let out = atep()
            .arg("export")
            .arg("--run")
            .arg(&dir)
            .args(["--what", what])
            .output()
            .unwrap();
        assert!(out.status.success(), "{what}: {}", stderr_of(&out));
    }
    let annecs = fs::read_to_string(dir.join("export/annecs.tsv")).unwrap();
    assert_eq!(annecs.lines().count(), 9, "header plus 8 rows");
    assert!(annecs.starts_with("iteration\tvalue\n"));
    let terrain_files: Vec<_> = fs::read_dir(dir.join("export"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("terrain-env"))
        .collect();
    assert!(!terrain_files.is_empty());

    // Unknown series: the diagnostic lists the valid names.
    let out = atep()
        .arg("export")
        .arg("--run")
        .arg(&dir)
        .args(["--what", "nope"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.contains("annecs") && err.contains("terrain"), "{err}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn eval_generalization_end_to_end() {
    let (a, b) = (tmp("gena"), tmp("genb"));
    run_to(&a, 51, 25);
    run_to(&b, 52, 25);
    let report_dir = tmp("genreport");
    let out = atep()
        .arg("eval-generalization")
        .arg(&a)
        .arg(&b)
        .args(["--n-envs", "1", "--n-runs", "3", "--out"])
        .arg(&report_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let summary = fs::read_to_string(report_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("above_300"));
    let table = fs::read_to_string(report_dir.join("report.tsv")).unwrap();
    assert!(table.starts_with("method\t"));

    // A single run directory triggers the self-generalization variant.
    let out = atep()
        .arg("eval-generalization")
        .arg(&a)
        .args(["--n-envs", "1", "--n-runs", "2", "--noise-sigma", "0", "--out"])
        .arg(&report_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let table = fs::read_to_string(report_dir.join("report.tsv")).unwrap();
    assert_eq!(table.lines().count(), 2, "one agent on its own environment");

    // Shortfall names the offending run.
    let out = atep()
        .arg("eval-generalization")
        .arg(&a)
        .arg(&b)
        .args(["--n-envs", "9999", "--n-runs", "1", "--out"])
        .arg(&report_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("solved environments"));
    fs::remove_dir_all(&a).ok();
    fs::remove_dir_all(&b).ok();
    fs::remove_dir_all(&report_dir).ok();
}

#[test]
fn preset_prints_a_loadable_config() {
    let out = atep().args(["preset", "epoet40x40-like"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fixed_topology.layers = 40,40"));
    assert!(text.contains("neat.structural_mutation = false"));

    let out = atep().args(["preset", "not-a-preset"]).output().unwrap();
    assert!(!out.status.success());
}
