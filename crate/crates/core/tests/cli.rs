mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

fn ragforge() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ragforge"));
    c.env("RUST_LOG", "warn");
    c
}

/// Copy of the fixture config pointing at the fixture corpus but writing
/// into `dir/workspace`.
fn config_in(dir: &Path) -> std::path::PathBuf {
    let fixture = common::fixture_dir();
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixture.join("pipeline.json")).unwrap()).unwrap();
    for src in v["corpus"].as_array_mut().unwrap() {
        let rel = src["dir"].as_str().unwrap().to_string();
        src["dir"] = fixture.join(rel).to_string_lossy().into_owned().into();
    }
    v["queries"] = fixture.join("queries.jsonl").to_string_lossy().into_owned().into();
    let path = dir.join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn run_report_and_retrieve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());

    let out = ragforge().args(["run", "all", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("workspace/report.json").exists());

    let out = ragforge().args(["report"]).arg(tmp.path().join("workspace")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Hit Rate (@10)"));
    assert!(text.contains("Retriever       |  Semantic |     Naive | Recursive"));

    let out = ragforge()
        .args(["retrieve", "--config", "naive/tfidf_weighted", "--k", "10", "--queries"])
        .arg(common::fixture_dir().join("queries.jsonl"))
        .arg("--pipeline")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 45);
    assert!(lines.iter().all(|l| l["hits"].as_array().unwrap().len() == 10 && l["chunking"] == "naive"));

    let out = ragforge()
        .args(["retrieve", "--config", "all", "--k", "3", "--queries"])
        .arg(common::fixture_dir().join("queries.jsonl"))
        .arg("--pipeline")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 9 * 45);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());
    let out = ragforge().args(["run", "evaluate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("artifacts missing"));

    let out = ragforge().args(["run", "nonsense", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown stage"));

    let out = ragforge().args(["report"]).arg(tmp.path().join("nowhere")).output().unwrap();
    assert!(!out.status.success());
}
