use std::fs;
use std::path::Path;

use heatlab::cli::{run, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK};
use serde_json::Value;

fn heatlab(args: &[&str]) -> i32 {
    run(std::iter::once("heatlab").chain(args.iter().copied()))
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn classify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let out = out.to_str().unwrap();

    assert_eq!(heatlab(&["classify", "--f", "s^3", "--d", "1", "--q", "1", "--out", out]), EXIT_OK);
    assert_eq!(read(Path::new(out))["result"]["verdict"]["outcome"], "NoLocalExistence");

    assert_eq!(heatlab(&["classify", "--f", "s^2", "--d", "2", "--q", "2", "--out", out]), EXIT_OK);
    assert_eq!(read(Path::new(out))["result"]["verdict"]["outcome"], "Exists");

    let args = ["classify", "--builtin", "log_family", "--d", "2", "--beta", "1", "--q", "1", "--out", out];
    assert_eq!(heatlab(&args), EXIT_OK);
    assert_eq!(read(Path::new(out))["result"]["verdict"]["outcome"], "NoLocalExistence");

    assert_eq!(heatlab(&["classify", "--f", "s^3.02", "--d", "2", "--q", "2", "--out", out]), EXIT_INCONCLUSIVE);
    let report = read(Path::new(out));
    assert_eq!(report["status"], "inconclusive");
    assert_eq!(report["constants"]["dead_band"], 0.05);
}

#[test]
fn errors_carry_machine_readable_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    let out = out.to_str().unwrap();
    assert_eq!(heatlab(&["classify", "--f", "s^^2", "--d", "1", "--out", out]), EXIT_ERROR);
    assert_eq!(read(Path::new(out))["error"]["code"], "syntax");
    assert_eq!(heatlab(&["classify", "--f", "s", "--d", "zero", "--out", out]), EXIT_ERROR);
    assert_eq!(read(Path::new(out))["error"]["code"], "config");
    assert_eq!(heatlab(&["classify", "--f", "s", "--q", "2"]), EXIT_ERROR);
    assert_eq!(heatlab(&["classify", "--no-such-flag"]), EXIT_ERROR);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("horizon.cfg");
    fs::write(&cfg, "# horizon run\nf = s + s^1.5\nd = 2\nu0-l1 = 0.5\nA = 2\n").unwrap();
    let out = dir.path().join("h.json");
    let args = ["experiment", "horizon", "--config", cfg.to_str().unwrap(), "--u0-l1", "1.0", "--out", out.to_str().unwrap()];
    assert_eq!(heatlab(&args), EXIT_OK);
    let report = read(&out);
    assert_eq!(report["config"]["u0_l1"], "1.0");
    let r = &report["result"];
    assert!(r["report"]["horizon"].as_f64().unwrap() > 0.0);
    assert_eq!(r["recheck_holds"], true);
    assert!(r["recheck_integral"].as_f64().unwrap() <= r["report"]["bound"].as_f64().unwrap());

    fs::write(&cfg, "f = s\nd = 2\nu0_l1 = 0.5\nmystery = 3\n").unwrap();
    assert_eq!(heatlab(&["experiment", "horizon", "--config", cfg.to_str().unwrap()]), EXIT_ERROR);
}

#[test]
fn critical_horizon_is_reported_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let args = ["experiment", "horizon", "--f", "s + s^2", "--d", "2", "--u0-l1", "0.5", "--out", out.to_str().unwrap()];
    assert_eq!(heatlab(&args), EXIT_ERROR);
    assert_eq!(read(&out)["error"]["code"], "integral_divergent");
}

#[test]
fn reports_are_byte_identical_and_metadata_is_separate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let args = ["experiment", "equivalence_suite", "--seed", "7", "--count", "20", "--out", out.to_str().unwrap()];
        assert_eq!(heatlab(&args), EXIT_OK);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let meta = read(&dir.path().join("a.json.meta.json"));
    assert!(meta["created_unix"].as_u64().is_some());
    let report = read(&a);
    assert_eq!(report["result"]["decided"], report["result"]["agreed"]);
}

#[test]
fn kernel_verification_passes_and_inflation_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.json");
    let out = out.to_str().unwrap();
    assert_eq!(heatlab(&["verify-kernel", "--d", "1", "--out", out]), EXIT_OK);
    assert_eq!(read(Path::new(out))["result"]["passed"], true);
    assert_eq!(heatlab(&["verify-kernel", "--d", "1", "--inflate", "40", "--out", out]), EXIT_ERROR);
    let report = read(Path::new(out));
    assert_eq!(report["status"], "failed");
    let witnesses = report["result"]["bounds"][0]["witnesses"].as_array().unwrap();
    assert!(!witnesses.is_empty());
}

#[test]
fn experiments_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let csv = dir.path().join("x.csv");
    let (out, csv) = (out.to_str().unwrap(), csv.to_str().unwrap());

    let args = ["experiment", "iterate", "--f", "s^2", "--d", "1", "--cells", "64", "--steps", "16", "--out", out, "--csv", csv];
    assert_eq!(heatlab(&args), EXIT_OK);
    assert_eq!(read(Path::new(out))["result"]["converged"], true);
    assert!(fs::read_to_string(csv).unwrap().starts_with("r,limit\n"));

    let args = ["experiment", "simulate", "--f", "s^2", "--d", "2", "--cells", "64", "--T", "0.05", "--out", out, "--csv", csv];
    assert_eq!(heatlab(&args), EXIT_OK);
    assert!(fs::read_to_string(csv).unwrap().starts_with("t,l1,lq,linf,dt,clamp_count\n"));

    let args = ["experiment", "lower_bound", "--f", "s^2", "--d", "1", "--mesh", "16", "--out", out, "--csv", csv];
    assert_eq!(heatlab(&args), EXIT_OK);
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 17);

    let args = ["experiment", "blowup_trend", "--f", "s^4", "--d", "1", "--q", "1", "--N", "3..5", "--out", out];
    assert_eq!(heatlab(&args), EXIT_OK);
    let report = read(Path::new(out));
    assert_eq!(report["result"]["rows"].as_array().unwrap().len(), 3);
    assert_eq!(report["result"]["strictly_increasing"], true);
}
