//! End-to-end tests of the command-line binary: exit codes, output
//! schemas, and byte-level determinism of seeded runs.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_otkit"));
    cmd.arg("--threads").arg("1");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn otkit")
}

fn gen(dir: &Path, name: &str, n: usize, d: usize, seed: u64, probability: bool) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec![
        "gen".into(),
        "--n".into(),
        n.to_string(),
        "--d".into(),
        d.to_string(),
        "--seed".into(),
        seed.to_string(),
        "--output".into(),
        path.display().to_string(),
    ];
    if probability {
        args.push("--mode".into());
        args.push("probability".into());
    }
    let out = bin().args(&args).output().expect("spawn otkit");
    assert!(out.status.success(), "gen failed: {out:?}");
    path
}

fn parse_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "command failed: {out:?}");
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn gen_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 50, 2, 9, false);
    let b = gen(dir.path(), "b.csv", 50, 2, 9, false);
    let c = gen(dir.path(), "c.csv", 50, 2, 10, false);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn uot_output_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 60, 2, 1, false);
    let b = gen(dir.path(), "b.csv", 55, 2, 2, false);
    let args = [
        "uot",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--lambda",
        "20",
        "--eta",
        "1",
    ];
    let doc1 = parse_stdout(&run(&args));
    let doc2 = parse_stdout(&run(&args));
    for key in [
        "uot_value",
        "dual_value",
        "plan_mass",
        "iterations",
        "marginal_mass_mu",
        "marginal_mass_nu",
        "mu_mass",
        "nu_mass",
    ] {
        assert!(doc1["result"].get(key).is_some(), "missing result key {key}");
    }
    // deterministic modulo the timing fields, which live only in the manifest
    assert_eq!(doc1["result"], doc2["result"]);
    assert!(doc1["manifest"]["inputs"][0]["sha256"].as_str().unwrap().len() == 64);

    let primal = doc1["result"]["uot_value"].as_f64().unwrap();
    let dual = doc1["result"]["dual_value"].as_f64().unwrap();
    assert!((primal - dual).abs() / dual.abs().max(1.0) < 1e-6);
}

#[test]
fn uot_backends_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 50, 1, 3, false);
    let b = gen(dir.path(), "b.csv", 45, 1, 4, false);
    let solve = |backend: &str| -> f64 {
        let doc = parse_stdout(&run(&[
            "uot",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--lambda",
            "20",
            "--backend",
            backend,
        ]));
        doc["result"]["uot_value"].as_f64().unwrap()
    };
    let dense = solve("dense");
    let fast = solve("nfft");
    assert!(
        (dense - fast).abs() / dense.abs().max(1.0) < 1e-7,
        "dense {dense} vs nfft {fast}"
    );
}

#[test]
fn debias_vanishes_on_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 40, 2, 5, false);
    let doc = parse_stdout(&run(&[
        "uot",
        a.to_str().unwrap(),
        a.to_str().unwrap(),
        "--lambda",
        "20",
        "--debias",
    ]));
    let sd = doc["result"]["sinkhorn_divergence"].as_f64().unwrap();
    assert!(sd.abs() < 1e-8, "self-divergence {sd}");
}

#[test]
fn missing_input_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("result.json");
    let out = run(&[
        "uot",
        dir.path().join("nope.csv").to_str().unwrap(),
        dir.path().join("nope2.csv").to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
    assert!(!out.stderr.is_empty());
}

#[test]
fn energy_mmd_mass_mismatch_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 40, 2, 6, false);
    let b = gen(dir.path(), "b.csv", 35, 2, 7, false);
    let refused = run(&["mmd", a.to_str().unwrap(), b.to_str().unwrap(), "--kernel", "energy"]);
    assert_eq!(refused.status.code(), Some(2));
    let forced = run(&[
        "mmd",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--kernel",
        "energy",
        "--force",
    ]);
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn mmd_verify_reports_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 80, 2, 8, false);
    let b = gen(dir.path(), "b.csv", 70, 2, 9, false);
    let doc = parse_stdout(&run(&[
        "mmd",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--kernel",
        "gauss",
        "--backend",
        "nfft",
        "--verify",
    ]));
    let residual = doc["result"]["residual_vs_dense"].as_f64().unwrap();
    assert!(residual < 1e-8, "residual {residual}");
}

#[test]
fn bench_refuses_large_dense_without_flag() {
    let out = run(&[
        "bench",
        "--task",
        "mmd",
        "--sizes",
        "30000",
        "--backends",
        "dense",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("allow-dense-large"), "stderr: {msg}");
}

#[test]
fn bench_csv_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bench.csv");
    let out = run(&[
        "bench",
        "--task",
        "mmd",
        "--sizes",
        "100,200",
        "--dims",
        "2",
        "--backends",
        "dense",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "task,backend,n,d,kernel,seconds,peak_mem_bytes_estimate,iterations"
    );
    assert_eq!(lines.count(), 2);
    // CSV outputs carry a sidecar manifest
    let sidecar = out_path.with_extension("manifest.json");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "bench");
}

#[test]
fn sweep_requires_probability_measures_and_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let raw = gen(dir.path(), "raw.csv", 30, 1, 11, false);
    let refused = run(&["sweep", raw.to_str().unwrap(), raw.to_str().unwrap(), "--etas", "1,10"]);
    assert_eq!(refused.status.code(), Some(2));

    let p = gen(dir.path(), "p.csv", 30, 1, 11, true);
    let q = gen(dir.path(), "q.csv", 30, 1, 12, true);
    let out = run(&["sweep", p.to_str().unwrap(), q.to_str().unwrap(), "--etas", "1,10"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("eta,sd,mmd_energy,diff\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn bounds_certificate_exits_zero_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 40, 2, 13, false);
    let b = gen(dir.path(), "b.csv", 35, 2, 14, false);
    let doc = parse_stdout(&run(&[
        "bounds",
        "--check",
        "c-star-reg",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--lambda",
        "5",
        "--eta",
        "2",
    ]));
    let r = &doc["result"];
    let at_star = r["restricted_objective_at_c_star"].as_f64().unwrap();
    assert!(at_star <= r["objective_at_half"].as_f64().unwrap());
    assert!(at_star <= r["objective_at_double"].as_f64().unwrap());
}

#[test]
fn pgm_inputs_are_accepted() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let doc = parse_stdout(&run(&[
        "uot",
        data.join("blobs_a.pgm").to_str().unwrap(),
        data.join("blobs_b.pgm").to_str().unwrap(),
        "--lambda",
        "20",
        "--backend",
        "nfft",
    ]));
    assert!(doc["result"]["uot_value"].as_f64().unwrap().is_finite());
}
