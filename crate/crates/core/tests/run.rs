//! Run orchestration against a real output directory.

use std::fs;
use std::path::Path;

use mll_core::io::{list_files, manifest_discrepancies, run, RunConfig, RunOptions, MANIFEST_NAME};
use mll_core::Error;

const FIXED: RunOptions = RunOptions {
    workers: Some(2),
    timestamp: Some(1_000),
};

fn config(out: &Path, model: &str, tasks: &str) -> RunConfig {
    let text = format!(
        r#"{{"model": {model}, "boundary": "mbc", "output_dir": {}, "tasks": {tasks}}}"#,
        serde_json::to_string(&out.display().to_string()).unwrap()
    );
    RunConfig::from_json(&text).unwrap()
}

const LADDER: &str = r#"{"n_cells": 80, "t1": 0.75, "delta_a": 0.25, "delta_b": -0.25, "t0": 0.01, "v": 0.5}"#;

fn assert_complete(dir: &Path, manifest: &mll_core::io::Manifest) {
    let (unlisted, missing) = manifest_discrepancies(dir, manifest).unwrap();
    assert!(unlisted.is_empty() && missing.is_empty(), "{unlisted:?} {missing:?}");
}

#[test]
fn empty_task_list_writes_only_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let report = run(&config(&out, LADDER, "[]"), &FIXED).unwrap();
    assert_eq!(report.exit_code, 0);
    assert_eq!(list_files(&out).unwrap(), vec![MANIFEST_NAME.to_string()]);
    assert_complete(&out, &report.manifest);
}

#[test]
fn spectrum_task_emits_one_row_per_state_and_a_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let report = run(&config(&out, LADDER, r#"[{"task": "spectrum"}]"#), &FIXED).unwrap();
    assert_eq!(report.exit_code, 0);
    assert_complete(&out, &report.manifest);

    let csv = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re_e,im_e,ipr,delta_rho,mean_position,region"));
    assert_eq!(lines.count(), 160);
    assert!(!csv.contains('\r'));

    let svg = fs::read_to_string(out.join("spectrum.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 160);
    // Both periodic bands drawn as curves.
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("<linearGradient"));
}

#[test]
fn invalid_model_names_the_field() {
    let text = format!(
        r#"{{"model": {}, "boundary": "obc", "output_dir": "x", "tasks": []}}"#,
        LADDER.replace("\"n_cells\": 80", "\"n_cells\": 1")
    );
    let e = RunConfig::from_json(&text).unwrap_err();
    assert!(e.to_string().contains("n_cells"), "{e}");
}

#[test]
fn rerun_replaces_previous_outputs_but_refuses_foreign_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let small = LADDER.replace("80", "8");
    let cfg = config(&out, &small, r#"[{"task": "states", "dir": "st"}, {"task": "perturb"}]"#);
    let first = run(&cfg, &FIXED).unwrap();
    let second = run(&cfg, &FIXED).unwrap();
    assert_eq!(first.manifest, second.manifest);
    assert_complete(&out, &second.manifest);

    fs::write(out.join("notes.txt"), "mine").unwrap();
    assert!(matches!(run(&cfg, &FIXED), Err(Error::Config(_))));
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "mine");
}

#[test]
fn failing_task_is_recorded_and_others_still_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = config(
        &out,
        &LADDER.replace("80", "8"),
        r#"[{"task": "states", "dir": "s"}, {"task": "perturb", "dir": "p"}]"#,
    );
    // No decomposition can meet this residual bound.
    cfg.tolerances.eigen.residual = 1e-300;
    let report = run(&cfg, &FIXED).unwrap();
    assert_eq!(report.exit_code, 1);
    assert_eq!(report.manifest.exit_code, 1);
    assert_eq!(report.manifest.tasks[0].status, "failed");
    assert!(report.manifest.tasks[0].error.is_some());
    assert_eq!(report.manifest.tasks[1].status, "ok");
    let written = &report.manifest.tasks[1].files;
    assert!(!written.is_empty() && written.iter().all(|f| out.join(f).is_file()));
    assert_complete(&out, &report.manifest);
}

#[test]
fn colliding_outputs_are_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = format!(
        r#"{{"model": {LADDER}, "boundary": "mbc", "output_dir": "{}", "tasks": [{{"task": "spectrum"}}, {{"task": "spectrum"}}]}}"#,
        out.display()
    );
    let e = RunConfig::from_json(&cfg).and_then(|c| c.validate()).unwrap_err();
    assert!(e.to_string().contains("overwrite"), "{e}");
    assert!(!out.exists());
}
