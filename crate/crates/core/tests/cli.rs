use std::fs;
use std::path::Path;
use std::process::Command;

use oplln::harness::csv_body;

fn oplln(sub: &str, config: &str, dir: &Path, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join(format!("{sub}.cfg"));
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_oplln"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn body_at(sub: &str, config: &str, workers: usize) -> String {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = oplln(sub, config, dir.path(), &["--workers", &workers.to_string()]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(dir.path().join("out").join(format!("{sub}.csv"))).unwrap();
    csv_body(&csv).to_string()
}

#[test]
fn lln_csv_is_identical_across_worker_counts() {
    let cfg = "ensemble = banded\nN = 16\np = 2\nn = [2, 8, 32]\ntrials = 200\ngrid = 16\nepsilon = [0.05, 0.1]\nseed = 7\n";
    let one = body_at("lln", cfg, 1);
    assert!(one.contains("empirical_prob"));
    for w in [4, 16] {
        assert_eq!(one, body_at("lln", cfg, w), "workers = {w}");
    }
}

#[test]
fn example_csv_is_identical_across_worker_counts() {
    let cfg = "n = [10, 100]\ntrials = 300\nN = 32\nseed = 3\n";
    let one = body_at("example2", cfg, 1);
    for w in [4, 16] {
        assert_eq!(one, body_at("example2", cfg, w), "workers = {w}");
    }
}

#[test]
fn artifacts_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = oplln("bounds", "rho_grid = [1]\nT = 1\ngrid = 11\nn = [1, 100]\nplot = true\n", dir.path(), &[]);
    assert_eq!(code, 0, "{text}");
    let out = dir.path().join("out");
    for ext in ["csv", "json", "config", "svg"] {
        assert!(out.join(format!("bounds.{ext}")).exists(), "{ext}");
    }
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(csv.starts_with("# generated "));
    assert!(csv.contains("rho,t,n,binomial_bound,f_bound,chain_ok"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["N"], 256);
    assert!(summary["invariants"].as_array().unwrap().iter().all(|i| i["status"] == "pass"));

    // re-running from the echoed config reproduces the table
    let echo = fs::read_to_string(out.join("bounds.config")).unwrap();
    let again = tempfile::tempdir().unwrap();
    let (code, _) = oplln("bounds", &echo, again.path(), &[]);
    assert_eq!(code, 0);
    let csv2 = fs::read_to_string(again.path().join("out").join("bounds.csv")).unwrap();
    assert_eq!(csv_body(&csv), csv_body(&csv2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = oplln("example1", "n = [10]\ntrials = 20\nN = 16\nseed = 1\n", dir.path(), &["--seed", "99"]);
    assert_eq!(code, 0);
    let echo = fs::read_to_string(dir.path().join("out").join("example1.config")).unwrap();
    assert!(echo.contains("seed = 99"), "{echo}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(oplln("bounds", "bogus = 1\n", dir.path(), &[]).0, 2);
    assert_eq!(oplln("bounds", "p = 1.5\nq = 2\n", dir.path(), &[]).0, 2);
    assert_eq!(oplln("lln", "trials = 0\n", dir.path(), &[]).0, 2);
    assert_eq!(oplln("no-such-command", "", dir.path(), &[]).0, 2);
    assert_eq!(oplln("lln", "ensemble = nope\n", dir.path(), &[]).0, 2);

    // x = ones at N = 64 needs n >> N^2 before the Chernoff deviation settles
    let (code, text) = oplln(
        "chernoff",
        "ensemble = diagonal_imaginary\nfield = complex\nN = 64\nn = [4, 16, 64]\nx = ones\n",
        dir.path(),
        &[],
    );
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL sup deviation non-increasing"));
    let csv = fs::read_to_string(dir.path().join("out").join("chernoff.csv")).unwrap();
    assert!(csv.trim_end().lines().last().unwrap().starts_with("# FAILED"));

    let (code, text) = oplln(
        "chernoff",
        "ensemble = diagonal_imaginary\nfield = complex\nN = 64\nn = [4, 16, 64]\nx = e1\n",
        dir.path(),
        &[],
    );
    assert_eq!(code, 0, "{text}");
}
