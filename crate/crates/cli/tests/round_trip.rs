mod common;

use std::fs;

use common::*;
use ispls_cli::io::{format_f64, read_matrix, write_flags, write_matrix};
use ndarray::Array2;
use proptest::prelude::*;
use tempfile::tempdir;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrices_round_trip(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 36),
        scale in -300i32..300,
    ) {
        let m = Array2::from_shape_fn((rows, cols), |(i, j)| seed[i * 6 + j] * 10f64.powi(scale) );
        let m = m.mapv(|v| if v.is_finite() { v } else { 1.0 });
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        prop_assert_eq!(back.dim(), m.dim());
        for (a, b) in back.iter().zip(m.iter()) {
            prop_assert!((a - b).abs() <= 1e-15 * b.abs(), "{} vs {}", a, b);
        }
    }

    #[test]
    fn decimal_text_is_exact(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = format_f64(v).parse().unwrap();
        prop_assert!(back == v);
    }
}

#[test]
fn flags_read_back_as_zero_one() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("f.csv");
    write_flags(&path, &[vec![true, false], vec![false, false]]).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "1,0\n0,0\n");
    assert_eq!(read_matrix(&path).unwrap(), ndarray::array![[1.0, 0.0], [0.0, 0.0]]);
}

#[test]
fn simulated_data_reads_back_exactly() {
    let dir = tempdir().unwrap();
    let manifest = simulate(dir.path(), &[]);
    let data = ispls_cli::io::read_studies(&manifest).unwrap();
    let spec =
        ispls_sim::ScenarioSpec { p: 20, ..ispls_sim::ScenarioSpec::standard(ispls_sim::Scenario::S1, 0.2, 30, 7) };
    let (direct, _) = ispls_sim::gen_scenario(&spec).unwrap();
    for (a, b) in data.studies().iter().zip(direct.studies()) {
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
    }
}

fn replay_matches(args: &[&str]) {
    let dir = tempdir().unwrap();
    let first = dir.path().join("first");
    let mut full = args.to_vec();
    full.extend_from_slice(&["--out", s(&first)]);
    ok(&full);
    let second = dir.path().join("second");
    ok(&["replay", s(&first.join("run.json")), "--out", s(&second)]);
    let (a, b) = (tree(&first), tree(&second));
    assert!(!a.is_empty());
    assert_eq!(a, b, "replay of {args:?} is not byte-identical");
}

#[test]
fn replay_reproduces_fit_and_cv() {
    let manifest = tiny_manifest();
    replay_matches(&["fit", "--manifest", s(&manifest), "--model", "hetero", "--contrast", "sign", "--mu1", "60"]);
    let dir = tempdir().unwrap();
    let data = simulate(dir.path(), &[]);
    replay_matches(&["cv", "--manifest", s(&data), "--model", "homo", "--contrast", "sign", "--folds", "3"]);
}

#[test]
fn replay_reproduces_simulate_benchmark_and_ooi() {
    replay_matches(&["simulate", "--scenario", "S2", "--p", "20", "--n", "25", "--seed", "4"]);
    replay_matches(&[
        "benchmark",
        "--scenario",
        "S1,S4",
        "--p",
        "20",
        "--n",
        "25",
        "--replicates",
        "2",
        "--methods",
        "meta_spls,ispls_homo_s",
        "--seed",
        "9",
    ]);
    let dir = tempdir().unwrap();
    let data = simulate(dir.path(), &[]);
    replay_matches(&["ooi", "--manifest", s(&data), "--methods", "meta_spls,ispls_hetero_m", "--resamples", "3"]);
}

#[test]
fn replay_rejects_edited_manifests() {
    let dir = tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&["fit", "--manifest", s(&tiny_manifest()), "--model", "homo", "--contrast", "mag", "--out", s(&first)]);
    let run = first.join("run.json");
    let text = fs::read_to_string(&run).unwrap().replace("\"kappa\": 0.5", "\"kappa\": 0.5, \"lambda\": 1");
    fs::write(&run, text).unwrap();
    let out = ispls(&["replay", s(&run), "--out", s(&dir.path().join("second"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lambda"));
}
