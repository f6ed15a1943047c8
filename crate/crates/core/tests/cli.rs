use std::path::Path;
use std::process::{Command, Output};

use orbiquant::experiments::{ErrorTable, Summary};

fn orbiquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbiquant"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const SMALL_CLASSICAL: &str = "experiment = \"classical-egorov\"\nseed = 11\n\
    [grid]\nn = [16, 24]\nt = [0.5, 1.0]\ntheta_points = 32\n";

#[test]
fn list_names_experiments_and_actions() {
    let out = orbiquant(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "classical-egorov",
        "matrix-egorov",
        "nc-egorov",
        "reduction",
        "algebra-suite",
        "Z2-reflection",
        "D<q>",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn shipped_configs_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let out = orbiquant(&["validate", "--config", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn validate_rejects_bad_models() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(
        tmp.path(),
        "bad.toml",
        "experiment = \"reduction\"\n[model]\nweight = [1]\n",
    );
    assert!(!orbiquant(&["validate", "--config", &bad]).status.success());
    let unknown = write(
        tmp.path(),
        "unknown.toml",
        "experiment = \"reduction\"\nextra = 1\n",
    );
    assert!(!orbiquant(&["validate", "--config", &unknown])
        .status
        .success());
}

#[test]
fn passing_run_writes_csv_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_CLASSICAL);
    let out_dir = tmp.path().join("out");
    let out = orbiquant(&[
        "run",
        "classical-egorov",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(&out_dir);
    assert!(s.passed && s.failures.is_empty());
    assert_eq!(s.seed, 11);
    assert_eq!(s.versions.orbiquant, env!("CARGO_PKG_VERSION"));
    let table = ErrorTable::from_csv(&std::fs::read_to_string(out_dir.join("detail.csv")).unwrap())
        .unwrap();
    assert_eq!(table.summary(), s.table);
}

#[test]
fn format_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &format!("{SMALL_CLASSICAL}[output]\nformat = \"csv\"\n"),
    );
    let out_dir = tmp.path().join("out");
    let out = orbiquant(&[
        "run",
        "classical-egorov",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let table =
        ErrorTable::from_json(&std::fs::read_to_string(out_dir.join("detail.json")).unwrap())
            .unwrap();
    assert!(!table.is_empty());
    assert!(!out_dir.join("detail.csv").exists());
}

#[test]
fn failed_gate_exits_nonzero_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    // a variable speed profile makes the reference only approximate
    let text = format!(
        "{SMALL_CLASSICAL}[model]\nprincipal = [{{ freq = 0, re = 1.0 }}, {{ freq = 1, re = 0.05 }}, {{ freq = -1, re = 0.05 }}]\n"
    );
    let cfg = write(tmp.path(), "c.toml", &text);
    let out_dir = tmp.path().join("out");
    let out = orbiquant(&[
        "run",
        "classical-egorov",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let s = summary(&out_dir);
    assert!(!s.passed);
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].gate, "symbol band error");
    assert!(s.error.is_none());
}

#[test]
fn run_errors_write_a_failure_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write(tmp.path(), "c.toml", SMALL_CLASSICAL);
    let out = orbiquant(&[
        "run",
        "reduction",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&out_dir);
    assert!(!s.passed);
    assert!(s.error.unwrap().contains("classical-egorov"));

    let missing = tmp.path().join("missing.toml");
    let out = orbiquant(&[
        "run",
        "reduction",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&out_dir).failures[0].gate, "run");
}

#[test]
fn output_dir_may_come_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("from-config");
    let text = format!(
        "{SMALL_CLASSICAL}[output]\ndir = {:?}\n",
        out_dir.to_str().unwrap()
    );
    let cfg = write(tmp.path(), "c.toml", &text);
    assert!(orbiquant(&["run", "classical-egorov", "--config", &cfg])
        .status
        .success());
    assert!(out_dir.join("summary.json").exists());
}
