use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsync")).args(args).output().unwrap()
}

fn model(name: &str) -> String {
    format!("{}/../../models/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulated(dir: &TempDir, name: &str, cases: &str) -> PathBuf {
    let out = dir.path().join(format!("{name}.csv"));
    let o = dsync(&["simulate", "--model", &model(name), "--seed", "1", "--max-cases", cases, "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn simulate_discover_check_report() {
    let dir = TempDir::new().unwrap();
    let log = simulated(&dir, "blocking", "500");
    let report = dir.path().join("report.json");
    let pt = dir.path().join("pt");
    let o = dsync(&[
        "discover", "--model", &model("blocking"), "--log", p(&log), "--out", p(&report), "--dump-ptlogs", p(&pt),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("Blocking @ pre-processing: nrtokens(q1) <= 4.5"), "{stdout}");

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["constraints"].as_array().unwrap().len(), 1);
    assert_eq!(json["constraints"][0]["transition"], "pre-processing");
    assert_eq!(json["replayability"]["unmatched"], 0);
    assert_eq!(json["modeled"][0]["constraint"], "nrtokens(q1) < 5");

    let dumped: Vec<_> = fs::read_dir(&pt).unwrap().collect();
    assert!(!dumped.is_empty());
    let blocking = fs::read_to_string(pt.join("Blocking[q1]@pre-processing.csv")).unwrap();
    assert!(blocking.starts_with("time,nrtokens(q1),label\n"));

    let o = dsync(&["check", "--model", &model("blocking"), "--log", p(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = dsync(&["report", p(&report)]);
    assert!(o.status.success());
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.contains("| Transition | Modeled | Discovered |"));
    assert!(md.contains("| pre-processing | `nrtokens(q1) < 5` | Blocking: `nrtokens(q1) <= 4.5` |"), "{md}");
}

#[test]
fn check_fails_on_a_stricter_guard() {
    let dir = TempDir::new().unwrap();
    let log = simulated(&dir, "blocking", "200");
    let strict = dir.path().join("strict.json");
    fs::write(&strict, fs::read_to_string(model("blocking")).unwrap().replace("nrtokens(q1) < 5", "nrtokens(q1) < 2")).unwrap();
    let o = dsync(&["check", "--model", p(&strict), "--log", p(&log)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("is false"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");

    let o = dsync(&["simulate", "--model", "/missing/model.json", "--seed", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/missing/model.json"));

    let o = dsync(&["simulate", "--model", &model("priority"), "--seed", "1", "--max-cases", "0", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = dsync(&["simulate", "--model", &model("priority"), "--seed", "1", "--max-cases", "0", "--horizon", "20", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "case,activity,start,complete\n1,packing,0,1\n").unwrap();
    let o = dsync(&["check", "--model", &model("priority"), "--log", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("packing"));

    let o = dsync(&["discover", "--model", &model("priority"), "--log", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));

    let cfg = dir.path().join("dsync.toml");
    fs::write(&cfg, "[extraction]\ntau_g = 2.0\n").unwrap();
    let o = dsync(&["discover", "--model", &model("priority"), "--log", p(&out), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_and_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let log = simulated(&dir, "blocking", "300");
    let cfg = dir.path().join("dsync.toml");
    fs::write(&cfg, "[extraction]\ntau_s = 100000\n").unwrap();
    let o = dsync(&["discover", "--model", &model("blocking"), "--log", p(&log), "--config", p(&cfg)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("no constraints discovered"));
    let o = dsync(&["discover", "--model", &model("blocking"), "--log", p(&log), "--config", p(&cfg), "--tau-s", "10"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("nrtokens(q1) <= 4.5"));
}
