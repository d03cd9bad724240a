use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use concept_monitor::synthetic::{write_reference_run, ReferenceSpec};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_concept-monitor");

fn cli(args: &[&str]) -> Output {
    cli_env(args, None)
}

fn cli_env(args: &[&str], threads_env: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("CONCEPT_MONITOR_THREADS");
    if let Some(v) = threads_env {
        cmd.env("CONCEPT_MONITOR_THREADS", v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by a signal")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn reference() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_reference_run(&dir.path().join("run"), &ReferenceSpec::default()).unwrap();
    (dir, manifest)
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn snapshot_args<'a>(manifest: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "snapshot", "--manifest", manifest, "--layer", "layer4", "--epoch", "10", "--out", out,
    ]
}

#[test]
fn validate_passes_on_reference_run() {
    let (_dir, manifest) = reference();
    let o = cli(&["validate", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() > 5);
    assert!(!out.contains("FAIL"));
}

#[test]
fn validate_reports_missing_checkpoint() {
    let (dir, manifest) = reference();
    std::fs::remove_file(dir.path().join("run/activations/layer4_e5.cmtx")).unwrap();
    let o = cli(&["validate", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn snapshot_writes_four_reports() {
    let (dir, manifest) = reference();
    let out = dir.path().join("out");
    let o = cli(&snapshot_args(manifest.to_str().unwrap(), out.to_str().unwrap()));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        files(&out),
        ["bars.svg", "categories.csv", "embedding.svg", "snapshot.json"]
    );
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn unknown_epoch_is_an_input_error() {
    let (dir, manifest) = reference();
    let out = dir.path().join("out");
    let mut args = snapshot_args(manifest.to_str().unwrap(), out.to_str().unwrap());
    args[6] = "999";
    let o = cli(&args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("layer4@999"), "{}", stderr(&o));
}

#[test]
fn usage_errors_and_help() {
    let o = cli(&["snapshot", "--bogus"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));
    let o = cli(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("snapshot"));
    assert_eq!(code(&cli(&[])), 2);
}

#[test]
fn malformed_manifests_fail_cleanly() {
    let (dir, manifest) = reference();
    let good = std::fs::read_to_string(&manifest).unwrap();
    let mut extra: serde_json::Value = serde_json::from_str(&good).unwrap();
    extra["unexpected"] = serde_json::json!(1);
    let cases = [
        ("empty", String::new()),
        ("invalid json", "{\"run_id\": ".to_string()),
        ("not an object", "[1, 2, 3]".to_string()),
        ("unknown field", extra.to_string()),
    ];
    for (name, text) in cases {
        let path = dir.path().join("run/bad.json");
        std::fs::write(&path, text).unwrap();
        for args in [
            vec!["validate", "--manifest", path.to_str().unwrap()],
            snapshot_args(path.to_str().unwrap(), dir.path().join("out").to_str().unwrap()),
        ] {
            let o = cli(&args);
            assert_eq!(code(&o), 2, "{name}: {}", stderr(&o));
            assert!(!stderr(&o).is_empty() || stdout(&o).contains("FAIL"), "{name}: no diagnostic");
        }
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn truncated_matrix_fails_cleanly() {
    let (dir, manifest) = reference();
    let path = dir.path().join("run/activations/layer4_e10.cmtx");
    let bytes = std::fs::read(&path).unwrap();
    for len in [0, 10, 28, bytes.len() - 1] {
        std::fs::write(&path, &bytes[..len]).unwrap();
        let out = dir.path().join("out");
        let o = cli(&snapshot_args(manifest.to_str().unwrap(), out.to_str().unwrap()));
        assert_eq!(code(&o), 2, "length {len}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "));
    }
}

#[test]
fn bad_flag_values_are_rejected() {
    let (dir, manifest) = reference();
    let m = manifest.to_str().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let extras: [&[&str]; 7] = [
        &["--detector", "nope"],
        &["--temperature", "0"],
        &["--temperature", "-1"],
        &["--top-k", "0"],
        &["--top-k", "100000"],
        &["--tau", "NaN"],
        &["--layer", "missing"],
    ];
    for extra in extras {
        let mut args = snapshot_args(m, o);
        args.extend_from_slice(extra);
        let r = cli(&args);
        assert_eq!(code(&r), 2, "{extra:?}: {}", stderr(&r));
        assert!(!stderr(&r).is_empty(), "{extra:?}: no diagnostic");
    }
}

#[test]
fn thread_flag_overrides_environment() {
    let (dir, manifest) = reference();
    let out = dir.path().join("out");
    let args = snapshot_args(manifest.to_str().unwrap(), out.to_str().unwrap());
    let o = cli_env(&args, Some("abc"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("CONCEPT_MONITOR_THREADS"));
    let mut with_flag = vec!["--threads", "2"];
    with_flag.extend_from_slice(&args);
    assert_eq!(code(&cli_env(&with_flag, Some("abc"))), 0);
    assert_eq!(code(&cli_env(&args, Some("3"))), 0);
    with_flag[1] = "0";
    assert_eq!(code(&cli(&with_flag)), 2);
}

#[test]
fn unwritable_output_is_exit_one() {
    let (_dir, manifest) = reference();
    let o = cli(&snapshot_args(manifest.to_str().unwrap(), "/dev/null/out"));
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("cannot write"));
}

#[test]
fn sandbox_trace_has_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sb");
    let o = cli(&["sandbox", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("sandbox_trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 301);
    assert_eq!(lines[0], "arm,beta,step,task_loss,d_anchor,accuracy");
    assert!(lines[1].starts_with("regularized,"));
    assert!(lines[302].starts_with("baseline,"));
    assert_eq!(
        files(&out),
        ["sandbox_d_anchor.svg", "sandbox_loss.svg", "sandbox_trace.csv"]
    );
}

#[test]
fn analysis_commands_write_their_files() {
    let (dir, manifest) = reference();
    let m = manifest.to_str().unwrap();
    let runs: [(&str, &[&str], &[&str]); 4] = [
        ("track", &["--neurons", "0,3"], &["trajectory.json", "trajectory.svg"]),
        ("compare", &["--epoch", "10", "--other-epoch", "0"], &["comparison.json"]),
        ("diversity", &[], &["diversity.csv", "diversity.svg"]),
        ("sweep", &["--epoch", "5"], &["sweep.csv", "sweep.svg"]),
    ];
    for (cmd, extra, expected) in runs {
        let out = dir.path().join(cmd);
        let mut args = vec![cmd, "--manifest", m, "--layer", "layer3", "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = cli(&args);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
        assert_eq!(files(&out), expected, "{cmd}");
    }
    let sweep = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 12);
    let diversity = std::fs::read_to_string(dir.path().join("diversity/diversity.csv")).unwrap();
    assert_eq!(diversity.lines().count(), 4);
}

#[test]
fn bad_neuron_index_is_an_input_error() {
    let (dir, manifest) = reference();
    let out = dir.path().join("out");
    let o = cli(&[
        "track", "--manifest", manifest.to_str().unwrap(), "--layer", "layer3", "--neurons", "0,24",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("invalid neuron index 24"), "{}", stderr(&o));
}
