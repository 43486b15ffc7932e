use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use kcsm::formats::{read_csv, read_event_log, replay, Summary};

const SMALL_D: &str = r#"
kind = "DScaling"
model = "fa1f"
q_list = [0.3, 0.4, 0.5, 0.6]
dims = [32]
horizon = 100.0
n_trajectories = 20
sample_dt = 1.0
seed = 5
"#;

fn small_d(exponent: f64, tol: f64) -> String {
    format!("{SMALL_D}\n[acceptance]\nexponent = {exponent:?}\nexponent_tol = {tol:?}\n")
}

fn kcsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcsm")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    kcsm(&args)
}

#[test]
fn same_seed_gives_identical_csv_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", &small_d(2.0, 5.0));
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run(&cfg, &a, &["--jobs", "1"]).status.success());
    assert!(run(&cfg, &b, &["--jobs", "3"]).status.success());
    let first = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("results.csv")).unwrap());
    run(&cfg, &c, &["--seed", "6"]);
    assert_ne!(first, fs::read(c.join("results.csv")).unwrap());

    let rows = read_csv(&first[..]).unwrap();
    assert!(rows.iter().all(|r| r.schema_version == 1));
    assert_eq!(rows.iter().filter(|r| r.quantity == "D").count(), 4);
    assert!(rows.iter().any(|r| r.quantity == "exponent"));

    let s: Summary = serde_json::from_slice(&fs::read(c.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.seed, 6);
    assert_eq!(s.config_sha256.len(), 64);
}

#[test]
fn failed_assertion_sets_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", &small_d(9.0, 0.1));
    let out = run(&cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] exponent"));
    let s: Summary = serde_json::from_slice(&fs::read(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert!(!s.passed);
}

#[test]
fn gap_table_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        "kind = \"GapTable\"\nmodel = \"east\"\nq_list = [0.3]\nlengths = [1,2,3,4,5,6,7,8,9,10]\nseed = 1\n",
    );
    let out = run(&cfg, &dir.path().join("o"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(fs::File::open(dir.path().join("o/results.csv")).unwrap()).unwrap();
    let gaps: Vec<f64> = rows.iter().filter(|r| r.quantity == "gap").map(|r| r.value).collect();
    assert_eq!(gaps.len(), 10);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(dir.path().join("o/generators/east_q0.3_L10/generator.tsv").exists());
}

#[test]
fn event_log_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", &small_d(2.0, 5.0).replace("seed = 5", "seed = 5\nevent_log = true"));
    assert!(run(&cfg, &dir.path().join("o"), &[]).status.success());
    let f = fs::File::open(dir.path().join("o/events.log")).unwrap();
    let (header, events) = read_event_log(BufReader::new(f)).unwrap();
    assert_eq!(header.initial.len(), 32);
    assert!(!events.is_empty());
    replay(&header, &events).unwrap();
}

#[test]
fn validate_reports_errors_and_costs() {
    let dir = tempfile::tempdir().unwrap();
    let ok = kcsm(&["validate", "--config", &write(dir.path(), "ok.toml", &small_d(2.0, 5.0))]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("projected runtime"));

    let bad_q = write(dir.path(), "q.toml", &SMALL_D.replace("0.3,", "1.2,"));
    let out = kcsm(&["validate", "--config", &bad_q]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_list"));

    let big = write(
        dir.path(),
        "g.toml",
        "kind = \"GapTable\"\nmodel = \"east\"\nq_list = [0.3]\nlengths = [30]\nseed = 1\n",
    );
    let out = kcsm(&["validate", "--config", &big]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1073741824"));

    let typo = write(dir.path(), "t.toml", "kind = \"DScaling\"\nmodel = \"fa1f\"\nq_list = [0.2]\nseed = 1\nhorizn = 3\n");
    let out = kcsm(&["validate", "--config", &typo]);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("horizn") && err.contains("line"), "{err}");
}

#[test]
fn lists_every_experiment() {
    let out = kcsm(&["list-experiments"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("AppendixFunctionals"));
}
