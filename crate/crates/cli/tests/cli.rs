use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rough-scl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ROUGH_SCL_OUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_cells = 100\npath = \"brownian(16)\"\n");
    let o = cli(&["solve", "--config", &cfg, "--seed", "4"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("solve-s4-0000");
    for f in ["manifest.json", "report.json", "config.toml", "invariants.csv"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let manifest = fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seeds\""));
}

#[test]
fn rerun_matches_original() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_cells = 100\npath = \"brownian(16)\"\ndatum = \"random-bv\"\nbc = \"periodic\"\n");
    assert!(cli(&["contraction", "--config", &cfg], tmp.path()).status.success());
    let first = tmp.path().join("contraction-s0-0000");
    let o = cli(&["rerun", first.join("manifest.json").to_str().unwrap(), "--sequential"], tmp.path());
    assert!(o.status.success());
    let second = tmp.path().join("contraction-s0-0001");
    assert_eq!(
        fs::read(first.join("contraction.csv")).unwrap(),
        fs::read(second.join("contraction.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_cels = 100\n");
    let o = cli(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(tmp.path(), "cfl = 1.5\n");
    assert_eq!(cli(&["solve", "--config", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn failing_gate_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["suite", "l1-identity"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("identity refinement ratio"));
}

#[test]
fn suite_criterion_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["suite", "c3", "composition", "--workers", "2"], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("criterion 3 irreversibility: PASS"));
    assert!(text.contains("criterion 4 composition: PASS"));
    assert!(tmp.path().join("suite-0000/suite.json").exists());
}

#[test]
fn unknown_suite_entry_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["suite", "c99"], tmp.path()).status.code(), Some(2));
}
