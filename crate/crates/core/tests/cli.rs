use std::path::PathBuf;
use std::process::{Command, Output};

use pluridyn::cli::RunManifest;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn pluridyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pluridyn")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    assert_eq!(pluridyn(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_error_exits_three_with_error_line() {
    let o = pluridyn(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("ERROR cli Config "), "{}", stderr(&o));
}

#[test]
fn missing_map_file_is_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = pluridyn(&["validate-map", "--map", "/nonexistent.pmap", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("ERROR cli Io "));
}

#[test]
fn validate_map_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let map = data("power2.pmap");
    let o = pluridyn(&["validate-map", "--map", map.to_str().unwrap(), "--nodes", "200", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("validate-map.run.json")).unwrap();
    let m: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.command, "validate-map");
    assert_eq!(m.artifacts.len(), 1);
    let csv = std::fs::read(dir.path().join("validate-map.csv")).unwrap();
    assert_eq!(m.artifacts[0].sha256, pluridyn::cli::sha256_hex(&csv));
}

#[test]
fn non_trapping_region_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let map = data("power2.pmap");
    let region = data("counterexample.toml");
    let o = pluridyn(&[
        "check-region",
        "--map",
        map.to_str().unwrap(),
        "--region",
        region.to_str().unwrap(),
        "--nodes",
        "300",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("ERROR attractor "));
    assert!(dir.path().join("check-region.csv").exists());
}
