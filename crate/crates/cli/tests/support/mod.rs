//! Helpers for driving the `svcert` binary.
#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub fn svcert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svcert"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

/// Runs the command and panics with its stderr if it fails.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = svcert(dir, args);
    assert!(
        out.status.success(),
        "svcert {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every command writing a file, in dependency order.
pub const PIPELINE: &[&[&str]] = &[
    &["gendata", "--n", "120", "--seed", "7", "--out", "data.csv"],
    &["bounds", "--n", "120", "--beta", "1e-2", "--out", "bounds.csv"],
    &["fit", "svr", "--data", "data.csv", "--rho", "0.2", "--out", "svr.json"],
    &["fit", "svdd", "--data", "data.csv", "--rho", "0.05", "--out", "svdd.json"],
    &["fit", "svm", "--data", "labels.csv", "--rho", "1", "--out", "svm.json"],
    &["sweep", "--data", "data.csv", "--rhos", "pow(3/5,2..6)", "--beta", "1e-2", "--out", "sweep.csv"],
    &["validate", "--trials", "4", "--n", "60", "--beta", "1e-2", "--rho", "0.3", "--test-size", "2000", "--seed", "7", "--out", "report.csv"],
    &["plot", "bounds", "--input", "bounds.csv", "--out", "bounds.svg"],
    &["plot", "cost_risk", "--input", "sweep.csv", "--out", "cost_risk.svg"],
    &["plot", "scatter", "--input", "report.csv", "--bounds", "bounds.csv", "--out", "scatter.svg"],
    &["plot", "tube", "--input", "data.csv", "--model", "svr.json", "--out", "tube.svg"],
];

pub const LABELS: &str = "m1,m2,y\n0.1,0.5,1\n-0.4,1.2,1\n1.5,-0.3,-1\n2.0,0.7,-1\n0.3,0.2,1\n1.1,1.9,-1\n";

/// Runs the pipeline in `dir` and returns every output file with its bytes.
pub fn run_pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fs::write(dir.join("labels.csv"), LABELS).unwrap();
    for args in PIPELINE {
        ok(dir, args);
    }
    PIPELINE
        .iter()
        .map(|args| {
            let out = args[args.iter().position(|a| *a == "--out").unwrap() + 1];
            (out.to_string(), fs::read(dir.join(out)).unwrap())
        })
        .collect()
}
