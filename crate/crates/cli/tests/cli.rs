use std::path::Path;
use std::process::Command;

use hyperwave_cli::output::read_rows_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperwave"))
}

fn short_linear(dir: &Path, workers: usize) -> String {
    let cfg = dir.join("linear.toml");
    std::fs::write(
        &cfg,
        format!(
            "preset = \"linear-quick\"\nworkers = {workers}\n\n[grid]\nt_final = 8.0\n\n[targets]\nlist = [2.0, 2.5, 3.0, 3.5]\n"
        ),
    )
    .unwrap();
    cfg.to_string_lossy().into_owned()
}

#[test]
fn identities_pass_and_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify-identities", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.starts_with("vector-field identities: PASS"));
    assert!(dir.path().join("verdict.txt").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["preset"], "identities");
    assert_eq!(meta["pass"], true);
    assert!(!dir.path().join("rows.csv").exists());
}

#[test]
fn short_linear_run_emits_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_linear(dir.path(), 1);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config", &cfg, "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("monitor energy_ineq_w"), "{stdout}");
    let rows = read_rows_csv(&out_dir.join("rows.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.s).collect::<Vec<_>>(), [2.0, 2.5, 3.0, 3.5]);
    assert!(rows.iter().all(|r| r.katayama == 0.0));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["run"]["termination"]["kind"], "completed");
    assert!(meta["config"].as_str().unwrap().contains("linear-quick"));
    let verdict = std::fs::read_to_string(out_dir.join("verdict.txt")).unwrap();
    assert!(verdict.starts_with("preset linear-quick:"));
}

#[test]
fn rows_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for w in [1, 2, 1] {
        let cfg = short_linear(dir.path(), w);
        let out_dir = dir.path().join(format!("out{}", files.len()));
        let st = bin().args(["run", "--config", &cfg, "--out"]).arg(&out_dir).status().unwrap();
        assert!(st.code().is_some_and(|c| c < 2));
        files.push(std::fs::read(out_dir.join("rows.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nh = -1.0\n\n[targets]\nlist = [2.0, 20.0]\n").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid.h"), "{err}");
    assert!(err.contains("target #1 s = 20 exceeds the coverage"), "{err}");
}

#[test]
fn unknown_preset_is_rejected() {
    let out = bin().args(["run", "--preset", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theorem-quick"));
}

#[test]
fn mms_writes_levels() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["mms", "--levels", "2", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.code().is_some_and(|c| c < 2));
    let text = std::fs::read_to_string(dir.path().join("mms.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("h,dt,steps,error"));
}

#[test]
fn snapshots_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("snap.toml");
    std::fs::write(
        &cfg,
        "preset = \"linear-quick\"\nworkers = 1\n\n[grid]\nt_final = 3.0\n\n[targets]\nlist = [2.0]\n\n[output]\ndir = \"unused\"\nsnapshot_every = 0\nfinal_snapshot = true\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).status().unwrap();
    let snaps: Vec<_> = std::fs::read_dir(out_dir.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 1);
    let path = snaps[0].as_ref().unwrap().path();
    let state = hyperwave_core::evolve::snapshot::load(&path).unwrap();
    assert!((state.t - 3.0).abs() < 1e-12);
    assert_eq!(state.layout.p, 2);
}
