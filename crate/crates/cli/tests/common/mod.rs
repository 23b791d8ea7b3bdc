#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ispls_cli::io::read_matrix;
use ndarray::Array2;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn tiny_manifest() -> PathBuf {
    fixtures().join("tiny/manifest.json")
}

pub fn ispls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ispls")).args(args).output().expect("spawn ispls")
}

/// Runs `ispls` and panics with its stderr unless it exits 0.
pub fn ok(args: &[&str]) -> Output {
    let out = ispls(args);
    assert!(out.status.success(), "ispls {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn matrix(path: &Path) -> Array2<f64> {
    read_matrix(path).unwrap_or_else(|e| panic!("{e}"))
}

pub fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir`, sorted by relative path, with its bytes.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Simulates a small S1 draw; `extra` holds flag/value pairs overriding the defaults.
pub fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut flags = vec![["--scenario", "S1"], ["--p", "20"], ["--n", "30"], ["--seed", "7"]];
    for pair in extra.chunks(2) {
        match flags.iter_mut().find(|f| f[0] == pair[0]) {
            Some(f) => f[1] = pair[1],
            None => flags.push([pair[0], pair[1]]),
        }
    }
    let mut args = vec!["simulate", "--out", s(dir)];
    args.extend(flags.iter().flatten());
    ok(&args);
    dir.join("manifest.json")
}
