#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use geolex::linalg::DenseMatrix;
use geolex::store;

pub fn geolex(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geolex"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GEOLEX_DATA_DIR")
        .output()
        .expect("binary runs")
}

/// Runs and insists on exit status 0.
pub fn ok(args: &[&str], cwd: &Path) -> String {
    let out = geolex(args, cwd);
    assert!(
        out.status.success(),
        "geolex {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn dense(path: &Path) -> DenseMatrix {
    store::read_dense(path).unwrap()
}

pub fn lines(path: &Path) -> Vec<String> {
    store::read_lines(path).unwrap()
}
