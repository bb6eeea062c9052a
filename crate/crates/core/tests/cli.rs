mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn scrapflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scrapflow"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn config() -> String {
    common::fixtures_dir()
        .join("pipeline.toml")
        .display()
        .to_string()
}

/// Quick settings so the CLI tests stay fast; the acceptance target runs the
/// shipped configuration unmodified.
const FAST: [&str; 8] = [
    "--grid",
    "1,2,3",
    "--iterations",
    "40",
    "--draws",
    "200",
    "--population-iterations",
    "200",
];

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn full_run_writes_a_verifiable_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cfg = config();
    let mut args = vec!["run", "--config", &cfg, "--out", out];
    args.extend(FAST);
    let result = scrapflow(&args);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    assert_eq!(result.status.code(), Some(0));

    let m = manifest(tmp.path());
    assert_eq!(m["complete"], true);
    assert_eq!(m["seed"], 42);
    let stages = m["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 6);
    assert!(
        stages.iter().all(|s| s["status"] == "completed"),
        "{stages:?}"
    );

    // Every listed artifact exists with the recorded hash, and nothing else
    // was written.
    let artifacts = m["artifacts"].as_array().unwrap();
    for a in artifacts {
        let bytes = fs::read(tmp.path().join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"], hex::encode(Sha256::digest(&bytes)));
        assert_eq!(a["bytes"], bytes.len());
    }
    let on_disk = walk(tmp.path()).len();
    assert_eq!(on_disk, artifacts.len() + 1, "orphan files in output");

    for expected in [
        "trade/network_2017-2021.csv",
        "trade/network_2017-2021.dot",
        "backbone/backbone_2007-2011.json",
        "firms/population.csv",
        "topics/perplexity.csv",
        "regression/coefficients.csv",
        "extrapolation/table.csv",
    ] {
        assert!(
            artifacts.iter().any(|a| a["path"] == expected),
            "{expected} missing"
        );
    }
    let table = fs::read_to_string(tmp.path().join("extrapolation/table.csv")).unwrap();
    assert!(table.lines().last().unwrap().starts_with("TOTAL,"));
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}

#[test]
fn repeated_runs_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config();
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        let mut args = vec![
            "run",
            "--config",
            &cfg,
            "--out",
            out,
            "--published-coefficient",
        ];
        args.extend(FAST);
        assert!(scrapflow(&args).status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("manifest.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();

    let missing = scrapflow(&["run", "--config", "/nonexistent/pipeline.toml"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nno_such_key = true\n").unwrap();
    let r = scrapflow(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no_such_key"));

    // Stochastic stages need a seed.
    let registry = common::fixtures_dir().join("firms.csv");
    let r = scrapflow(&[
        "topics",
        "--registry",
        registry.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("seed"));

    // A stage asked for explicitly whose inputs are not configured.
    let r = scrapflow(&["backbone", "--out", out]);
    assert_eq!(r.status.code(), Some(2));

    let cfg = config();
    let r = scrapflow(&["ingest", "--config", &cfg, "--out", out, "--alpha", "1.5"]);
    assert_eq!(r.status.code(), Some(2));
    let r = scrapflow(&[
        "ingest",
        "--config",
        &cfg,
        "--out",
        out,
        "--formats",
        "xlsx",
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn stage_failure_exits_with_one_and_keeps_a_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    // Two observations cannot support six regressors.
    let capacity = tmp.path().join("capacity.csv");
    fs::write(
        &capacity,
        "country,eaf_capacity_kt,bof_capacity_kt\nAUT,100,10\nDEU,900,50\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let cfg = config();
    let mut args = vec![
        "extrapolate",
        "--config",
        &cfg,
        "--capacity",
        capacity.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(FAST);
    let r = scrapflow(&args);
    assert_eq!(
        r.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );

    let m = manifest(&out);
    assert_eq!(m["complete"], false);
    let status = |name: &str| {
        m["stages"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["stage"] == name)
            .map(|s| s["status"].as_str().unwrap().to_string())
    };
    assert_eq!(status("firms").as_deref(), Some("completed"));
    assert_eq!(status("regress").as_deref(), Some("failed"));
    assert_eq!(status("extrapolate").as_deref(), Some("not run"));
    assert!(out.join("firms/population.csv").exists());
}

#[test]
fn overrides_reach_the_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config();
    let out = tmp.path().to_str().unwrap();
    let r = scrapflow(&[
        "ingest",
        "--config",
        &cfg,
        "--out",
        out,
        "--window",
        "2010-2012",
        "--formats",
        "json",
    ]);
    assert!(r.status.success());
    assert!(tmp.path().join("trade/network_2010-2012.json").exists());
    assert!(tmp.path().join("trade/network_2010-2012.dot").exists());
    assert!(!tmp.path().join("trade/network_2017-2021.csv").exists());
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("ingest"));
}
