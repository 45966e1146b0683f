//! Subcommands and exit codes of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn automine(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_automine")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn gen(dir: &Path, n: &str) -> PathBuf {
    assert_eq!(code(&automine(dir, &["gen-data", "--n", n, "--seed", "1", "--out", "data.csv"])), 0);
    dir.join("data.csv")
}

#[test]
fn stage_commands_chain_through_artifacts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "200");
    let ok = |args: &[&str]| {
        let out = automine(d, args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let listing = ok(&["ingest", "--in", "data.csv", "--out-dir", "o"]);
    assert!(listing.contains("200 records, 25 attributes"));
    let ranks = ok(&["rank", "--in", "data.csv", "--objective", "semester percentage", "--out-dir", "o"]);
    assert!(ranks.contains("selected:") && ranks.contains("SEMESTER"));
    ok(&["cluster", "--in", "data.csv", "--attrs", "LAB_MARK,PASS_PERCENTAGE", "--algorithm", "pam", "--k", "3", "--out-dir", "o"]);
    ok(&["detect", "--model", "o/model.json", "--in", "data.csv", "--out-dir", "o"]);
    ok(&["viz", "--model", "o/model.json", "--quality", "o/quality.json", "--in", "data.csv", "--out-dir", "o"]);
    for f in ["attributes.json", "ranks.json", "model.json", "quality.json", "plotspec.json", "plot-1-histogram.svg", "plot-2-scatter2d.svg"] {
        assert!(d.join("o").join(f).is_file(), "{f}");
    }
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("o/model.json")).unwrap()).unwrap();
    assert_eq!(model["version"], 1);
    assert_eq!(model["spec"]["algorithm"], "pam");
}

#[test]
fn mine_then_profile_show() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "150");
    let out = automine(d, &["mine", "--in", "data.csv", "--user", "ann", "--objective", "semester performance", "--k", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("out/report.json").is_file());
    let out = automine(d, &["profile", "show", "--user", "ann"]);
    assert_eq!(code(&out), 0);
    let profile: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(profile["sessions"].as_array().unwrap().len(), 1);
    assert_eq!(code(&automine(d, &["profile", "show", "--user", "nobody"])), 3);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "60");
    assert_eq!(code(&automine(d, &["no-such-command"])), 2);
    assert_eq!(code(&automine(d, &["mine", "--in", "data.csv", "--objective", "x"])), 2);
    std::fs::write(d.join("bad.toml"), "[ranking]\nweights = 1\n").unwrap();
    assert_eq!(code(&automine(d, &["--config", "bad.toml", "ingest", "--in", "data.csv"])), 2);
    assert_eq!(code(&automine(d, &["ingest", "--in", "absent.csv"])), 3);
    std::fs::write(d.join("ragged.csv"), "a,b\n1,2\n3\n").unwrap();
    assert_eq!(code(&automine(d, &["ingest", "--in", "ragged.csv"])), 3);
    let out = automine(d, &["mine", "--in", "data.csv", "--user", "u", "--objective", "x", "--attrs", "SEMESTER", "--algorithm", "kmeans"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cluster_formation"));
    assert!(d.join("out/failed/report.json").is_file());
}
