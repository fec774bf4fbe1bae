use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermi-rpa"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn without_timestamp(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn zero_potential_has_no_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let s = stdout_json(&run(&["energy", "--kf", "6", "--potential", "zero"], dir.path()));
    assert_eq!(s["summary"]["e_corr"]["trace"], 0.0);
    assert_eq!(s["schema"], "fermi-rpa/1");
}

#[test]
fn energy_is_reproducible_and_echoes_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["energy", "--n", "5000", "--method", "trace,integral", "--seed", "4"];
    stdout_json(&run(&args, a.path()));
    stdout_json(&run(&args, b.path()));
    let (mut x, mut y) = (without_timestamp(&a.path().join("energy.json")), without_timestamp(&b.path().join("energy.json")));
    for v in [&mut x, &mut y] {
        v["config"].as_object_mut().unwrap().remove("out");
    }
    assert_eq!(x, y);
    let cfg = &x["config"];
    assert_eq!(cfg["n"], 5000);
    assert_eq!(cfg["epsilon"], 1.0 / 27.0);
    assert_eq!(cfg["potential"], "radial:0=0.5,1=0.5");
    assert_eq!(cfg["seed"], 4);
    let per_k = x["result"]["per_k"].as_array().unwrap();
    assert_eq!(per_k.len(), 3);
    assert!(per_k[0]["e_symplectic"].is_null());
    assert!(x["result"]["e_corr"]["trace"].as_f64().unwrap() < 0.0);
}

#[test]
fn sweep_writes_rows_and_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let s = stdout_json(&run(&["sweep", "--targets", "3000,6000,12000,24000", "--method", "trace"], dir.path()));
    assert!(s["summary"]["fitted_exponent"].is_number());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("N,k_f,M,hf_kinetic"));
    assert!(lines[5].starts_with("fitted_exponent,"));
    let cols = lines[0].split(',').count();
    assert!(lines[1..5].iter().all(|l| l.split(',').count() == cols));
}

#[test]
fn count_and_partition_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&run(&["count", "--kf", "12"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    assert!(csv.starts_with("k1,k2,k3,alpha,plus,n_sq,u,v,v_sq_leading,rel_err\n"));
    assert!(csv.lines().count() > 1);
    let s = stdout_json(&run(&["partition", "--n", "100000", "--patches", "32"], dir.path()));
    assert_eq!(s["summary"]["M"], 32);
    let table = fs::read_to_string(dir.path().join("partition.txt")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#') && !l.starts_with("alpha")).count(), 32);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "kf = 7\nmethod = trace\npotential = zero\n").unwrap();
    let s = stdout_json(&run(&["energy", "--config", conf.to_str().unwrap(), "--kf", "8"], dir.path()));
    assert_eq!(s["summary"]["k_f"], 8.0);
}

#[test]
fn invalid_configuration_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["energy", "--kf", "6", "--epsilon", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["error"], "config");
    let o = run(&["energy", "--kf", "6", "--potential", "radial:0=-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn sandbox_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let s = stdout_json(&run(&["sandbox", "--seed", "1"], dir.path()));
    assert_eq!(s["summary"]["passed"], true);
    let report = without_timestamp(&dir.path().join("sandbox.json"));
    let checks = report["result"]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["passed"] == true));
}
