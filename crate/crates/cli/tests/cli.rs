use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pauliprop::output::parse_trajectory_csv;
use pauliprop::TrajectoryRecord;
use tempfile::TempDir;

fn pauliprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pauliprop"))
        .args(args)
        .env_remove("PAULIPROP_THREADS")
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, config: &str) -> Output {
    let path = dir.join("run.cfg");
    fs::write(&path, config).unwrap();
    pauliprop(&["simulate", "--config", path.to_str().unwrap()])
}

fn trajectory(dir: &Path) -> Vec<TrajectoryRecord> {
    parse_trajectory_csv(&fs::read_to_string(dir.join("trajectory.csv")).unwrap()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn zero_time_gives_a_single_record() {
    let dir = TempDir::new().unwrap();
    let out = simulate(
        dir.path(),
        "model = xxz\nL = 6\nt = 0\ntau = 0.05\nK = 64\n",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = trajectory(dir.path());
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].time, 0.0);
    assert!((recs[0].value - 0.5).abs() < 1e-15);
}

#[test]
fn two_site_run_matches_dense_reference() {
    let dir = TempDir::new().unwrap();
    let cfg = "model = xxz\nL = 2\nJz = 0.7\nt = 2\nsteps = 40\nK = inf\nobservable = ZI\n\
               state = plus\nreference = dense\nrecord_every = 4\n";
    let out = simulate(dir.path(), cfg);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = trajectory(dir.path());
    let reference = data_rows(&fs::read_to_string(dir.path().join("reference.csv")).unwrap());
    assert_eq!(recs.len(), 10);
    assert_eq!(reference.len(), recs.len());
    for (r, row) in recs.iter().zip(&reference) {
        assert_eq!(row[0].parse::<usize>().unwrap(), r.step);
        let v: f64 = row[2].parse().unwrap();
        assert!(
            (v - r.value).abs() < 1e-12,
            "step {}: {v} vs {}",
            r.step,
            r.value
        );
    }
}

#[test]
fn free_chain_records_every_step() {
    let dir = TempDir::new().unwrap();
    let cfg = "model = xxz\nL = 50\nJz = 0\nt = 10\ntau = 0.05\nK = 4096\nmode = joint\n";
    let out = simulate(dir.path(), cfg);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = trajectory(dir.path());
    assert_eq!(recs.len(), 200);
    assert!((recs[199].time - 10.0).abs() < 1e-12);
    assert!(recs.iter().all(|r| r.value.abs() <= 0.5 + 1e-12));
}

#[test]
fn rerun_from_output_header_is_identical() {
    let dir = TempDir::new().unwrap();
    let cfg =
        "model = xxz\nL = 8\nJz = 0.5\nt = 1\ntau = 0.1\nK = 128\nobservable = Z:3\nose = true\n";
    assert!(simulate(dir.path(), cfg).status.success());
    let first = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let copy = dir.path().join("first.csv");
    fs::write(&copy, &first).unwrap();
    let out = pauliprop(&["simulate", "--config", copy.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("trajectory.csv")).unwrap(),
        first
    );
}

#[test]
fn snapshots_feed_analyze() {
    let dir = TempDir::new().unwrap();
    let cfg = "model = xxz\nL = 6\nJz = 0.5\nt = 1\nsteps = 10\nK = 256\nobservable = Z:2\n\
               snapshot_every = 5\nout_dir = out\n";
    assert!(simulate(dir.path(), cfg).status.success());
    let out_dir = dir.path().join("out");
    for step in [0, 5, 10] {
        assert!(out_dir
            .join(format!("operator_step_{step:04}.txt"))
            .exists());
    }
    let out = pauliprop(&[
        "analyze",
        "--in",
        out_dir.to_str().unwrap(),
        "--k",
        "4,16",
        "--eps",
        "0.01",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let growth = data_rows(&fs::read_to_string(out_dir.join("growth.csv")).unwrap());
    let steps: Vec<&str> = growth.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(steps, ["0", "5", "10"]);
    assert_eq!(growth[0][2], "1");
    // two alphas per snapshot
    let ose = data_rows(&fs::read_to_string(out_dir.join("ose.csv")).unwrap());
    assert_eq!(ose.len(), 6);
    // one alpha below 1, two budgets, one epsilon, three snapshots
    let bounds = data_rows(&fs::read_to_string(out_dir.join("bounds.csv")).unwrap());
    assert_eq!(bounds.len(), 6);
    assert!(out_dir.join("coefficients_step_0010.csv").exists());
    assert!(out_dir.join("weights_step_0005.csv").exists());
}

#[test]
fn single_term_dump_has_zero_entropy() {
    let dir = TempDir::new().unwrap();
    let dump = dir.path().join("op.txt");
    fs::write(&dump, "# time = 0.5\n1.0 IZXI\n").unwrap();
    let out = pauliprop(&["analyze", "--in", dump.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = data_rows(&fs::read_to_string(dir.path().join("ose.csv")).unwrap());
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row[0], "0.5");
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    }
    let weights = data_rows(&fs::read_to_string(dir.path().join("weights.csv")).unwrap());
    assert_eq!(weights, vec![vec!["2".to_string(), "1".to_string()]]);
}

#[test]
fn bound_reproduces_budget_and_reports_overflow() {
    let out = pauliprop(&["bound", "--s", "6.08", "--eps", "0.001", "--alpha", "0.5"]);
    assert!(out.status.success());
    let k = stdout_json(&out)["k_required"].as_u64().unwrap();
    assert!((8.5e8..=9.0e8).contains(&(k as f64)), "{k}");

    let out = pauliprop(&[
        "bound", "--s", "100", "--eps", "0.001", "--alpha", "0.5", "--k", "10",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!(v["k_required"].is_null());
    assert!(v["ln_k"].as_f64().unwrap() > 44.0);
    assert!(v["ln_delta_bound"].is_number());
}

#[test]
fn verify_algebra_reports_json() {
    let out = pauliprop(&["verify", "--suite", "algebra"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["suite"], "algebra");
    assert_eq!(v["passed"], true);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.cfg");
    assert_eq!(
        pauliprop(&["simulate", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        simulate(dir.path(), "model = xxz\nL = 4\nt = 1\nbogus = 1\n")
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        pauliprop(&["verify", "--suite", "nope"]).status.code(),
        Some(2)
    );
    // beyond the dense reference's qubit cap
    let big =
        "model = xxz\nL = 16\nt = 0.1\nsteps = 1\nK = 16\nobservable = Z:3\nreference = dense\n";
    assert_eq!(simulate(dir.path(), big).status.code(), Some(2));
    // the weight cap keeps only words lighter than 2, which removes ZZ
    let collapse =
        "model = xxz\nL = 2\nt = 1\nsteps = 4\npolicy = weight\nweight_cap = 2\nobservable = ZZ\n";
    let out = simulate(dir.path(), collapse);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_pauliprop"))
        .args(["bound", "--s", "1", "--eps", "0.1", "--alpha", "0.5"])
        .env("PAULIPROP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn columns(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    assert!(
        text.starts_with("# version = pauliprop "),
        "{}",
        path.display()
    );
    text.lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .to_string()
}

#[test]
fn free_chain_growth_is_monotone_and_schemas_are_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = "model = xxz\nL = 20\nJz = 0\nt = 1\ntau = 0.05\nK = inf\nobservable = Z:10\n\
               snapshot_every = 1\nose = true\n";
    assert!(simulate(dir.path(), cfg).status.success());
    let out = pauliprop(&["analyze", "--in", dir.path().to_str().unwrap(), "--k", "8"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let growth = data_rows(&fs::read_to_string(dir.path().join("growth.csv")).unwrap());
    assert_eq!(growth.len(), 21);
    let counts: Vec<usize> = growth.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    assert!(counts[20] > counts[1]);

    let d = dir.path();
    assert_eq!(
        columns(&d.join("trajectory.csv")),
        "step,time,value,terms,discarded_mass,norm_ratio,ose_half,ose_shannon"
    );
    assert_eq!(columns(&d.join("ose.csv")), "time,alpha,value");
    assert_eq!(columns(&d.join("growth.csv")), "step,time,terms");
    assert_eq!(
        columns(&d.join("coefficients_step_0020.csv")),
        "bucket_lo,bucket_hi,mass"
    );
    assert_eq!(columns(&d.join("weights_step_0020.csv")), "weight,mass");
    assert_eq!(
        columns(&d.join("bounds.csv")),
        "time,alpha,K,ose,ln_tail,ln_delta_bound,error_exact,error_bound,epsilon,K_required"
    );
}
