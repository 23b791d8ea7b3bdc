mod common;

use std::fs;
use std::path::Path;

use common::*;
use ndarray::{Array1, Array2};
use serde_json::Value;
use tempfile::tempdir;

fn run_json(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) {
    assert_eq!(a.dim(), b.dim());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

fn check_golden(name: &str, flags: &[&str]) {
    let dir = tempdir().unwrap();
    let manifest = tiny_manifest();
    let mut args = vec!["fit", "--manifest", s(&manifest), "--out", s(dir.path())];
    args.extend_from_slice(flags);
    ok(&args);
    let golden = fixtures().join("golden").join(name);
    assert_eq!(
        fs::read(dir.path().join("selection.csv")).unwrap(),
        fs::read(golden.join("selection.csv")).unwrap(),
        "selection differs from golden"
    );
    for file in ["directions.csv", "beta_1.csv", "beta_2.csv"] {
        assert_close(&matrix(&dir.path().join(file)), &matrix(&golden.join(file)), 1e-10);
    }

    // Structural checks the frozen files were validated against.
    let w = matrix(&golden.join("directions.csv"));
    let sel = matrix(&golden.join("selection.csv"));
    for l in 0..2 {
        let norm = w.row(l).dot(&w.row(l)).sqrt();
        assert!((norm - 1.0).abs() < 1e-8);
        let beta = matrix(&golden.join(format!("beta_{}.csv", l + 1)));
        for j in 0..4 {
            assert_eq!(sel[[l, j]] == 1.0, w[[l, j]] != 0.0);
            assert_eq!(beta[[j, 0]] == 0.0, w[[l, j]] == 0.0);
        }
    }
    if name == "homo_mag" {
        assert_eq!(sel.row(0), sel.row(1), "homogeneity selects one pattern");
    }
}

#[test]
fn golden_homogeneity_magnitude() {
    check_golden("homo_mag", &["--model", "homo", "--contrast", "mag", "--mu1", "200", "--mu2", "0.1"]);
}

#[test]
fn golden_heterogeneity_sign() {
    check_golden("hetero_sign", &["--model", "hetero", "--contrast", "sign", "--mu1", "60", "--mu2", "0.1"]);
}

#[test]
fn penalties_off_give_per_study_pls_directions() {
    let manifest = tiny_manifest();
    for model in ["homo", "hetero"] {
        let dir = tempdir().unwrap();
        ok(&[
            "fit",
            "--manifest",
            s(&manifest),
            "--model",
            model,
            "--contrast",
            "mag",
            "--no-standardize",
            "--out",
            s(dir.path()),
        ]);
        let w = matrix(&dir.path().join("directions.csv"));
        for l in 0..2 {
            // With one response the first PLS direction is X'y / ||X'y||.
            let x = matrix(&fixtures().join(format!("tiny/study_{}_x.csv", l + 1)));
            let y = matrix(&fixtures().join(format!("tiny/study_{}_y.csv", l + 1)));
            let g: Array1<f64> = x.t().dot(&y.column(0));
            let cos = w.row(l).dot(&g) / g.dot(&g).sqrt();
            assert!((cos.abs() - 1.0).abs() < 1e-10, "{model} study {l}: |cos| = {}", cos.abs());
        }
    }
}

#[test]
fn run_manifest_records_resolved_parameters() {
    let dir = tempdir().unwrap();
    let m = tiny_manifest();
    ok(&["fit", "--manifest", s(&m), "--model", "hetero", "--contrast", "sign", "--mu1", "5", "--out", s(dir.path())]);
    let run = run_json(dir.path());
    let fit = &run["config"]["fit"];
    assert_eq!(fit["manifest"], s(&m));
    assert_eq!(fit["standardize"], true);
    assert_eq!(fit["solver"]["penalty"]["model"], "heterogeneity");
    assert_eq!(fit["solver"]["penalty"]["mu1"], 5.0);
    assert_eq!(fit["solver"]["penalty"]["tau2"], 0.5);
    assert_eq!(run["result"]["converged"], true);
    assert!(!run["result"]["objective_trace"].as_array().unwrap().is_empty());
}

#[test]
fn non_convergence_is_recorded_not_fatal() {
    let dir = tempdir().unwrap();
    let manifest = tiny_manifest();
    let out = ok(&[
        "fit",
        "--manifest",
        s(&manifest),
        "--model",
        "hetero",
        "--contrast",
        "sign",
        "--mu1",
        "60",
        "--mu2",
        "0.1",
        "--max-iter",
        "1",
        "--tol",
        "1e-300",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(run_json(dir.path())["result"]["converged"], false);
    assert!(stderr(&out).contains("converged=false"));
    assert!(dir.path().join("directions.csv").exists());
}

/// Copies the tiny fixture into a scratch directory and lets `edit` break it.
fn broken(edit: impl FnOnce(&Path)) -> (tempfile::TempDir, std::process::Output) {
    let dir = tempdir().unwrap();
    for f in fs::read_dir(fixtures().join("tiny")).unwrap() {
        let f = f.unwrap().path();
        fs::copy(&f, dir.path().join(f.file_name().unwrap())).unwrap();
    }
    edit(dir.path());
    let m = dir.path().join("manifest.json");
    let out_dir = dir.path().join("out");
    let out = ispls(&["fit", "--manifest", s(&m), "--model", "homo", "--contrast", "mag", "--out", s(&out_dir)]);
    (dir, out)
}

#[test]
fn missing_response_file_names_the_path() {
    let (dir, out) = broken(|d| fs::remove_file(d.join("study_2_y.csv")).unwrap());
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("study_2_y.csv");
    assert!(stderr(&out).contains(s(&missing)), "{}", stderr(&out));
}

#[test]
fn ragged_row_is_reported_with_its_position() {
    let (_dir, out) = broken(|d| {
        let p = d.join("study_1_x.csv");
        let text = fs::read_to_string(&p).unwrap().replacen("-1.22,-1.29,0.71,0.47", "-1.22,-1.29,0.71", 1);
        fs::write(p, text).unwrap();
    });
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("study_1_x.csv") && err.contains("row 3 has 3 fields, expected 4"), "{err}");
}

#[test]
fn non_numeric_cell_is_reported_with_its_position() {
    let (_dir, out) = broken(|d| {
        let p = d.join("study_2_x.csv");
        let mut lines: Vec<String> = fs::read_to_string(&p).unwrap().lines().map(String::from).collect();
        let mut cells: Vec<&str> = lines[1].split(',').collect();
        cells[2] = "abc";
        lines[1] = cells.join(",");
        fs::write(p, lines.join("\n")).unwrap();
    });
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 2, column 3: `abc` is not a number"), "{}", stderr(&out));
}

#[test]
fn dimension_mismatches_exit_2() {
    let (_d, out) = broken(|d| {
        let p = d.join("study_1_y.csv");
        let text = fs::read_to_string(&p).unwrap();
        fs::write(p, text.lines().take(5).collect::<Vec<_>>().join("\n")).unwrap();
    });
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let (_d, out) = broken(|d| {
        let p = d.join("study_2_x.csv");
        let text: Vec<String> =
            fs::read_to_string(&p).unwrap().lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect();
        fs::write(p, text.join("\n")).unwrap();
    });
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_manifest_key_is_rejected() {
    let (_d, out) = broken(|d| {
        let p = d.join("manifest.json");
        let text = fs::read_to_string(&p).unwrap().replacen("\"id\": \"a\",", "\"id\": \"a\", \"weight\": 2,", 1);
        fs::write(p, text).unwrap();
    });
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("weight"), "{}", stderr(&out));
}

#[test]
fn invalid_parameters_exit_2_before_any_output() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let manifest = tiny_manifest();
    for (flag, name) in [("--kappa=0.7", "kappa"), ("--a=1", "`a`"), ("--tau2=0", "tau2"), ("--mu1=-1", "mu1")] {
        let out = ispls(&[
            "fit",
            "--manifest",
            s(&manifest),
            "--model",
            "homo",
            "--contrast",
            "sign",
            flag,
            "--out",
            s(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(2), "{flag}");
        assert!(stderr(&out).contains(name), "{flag}: {}", stderr(&out));
        assert!(!out_dir.exists());
    }
    let out = ispls(&["fit", "--manifest", s(&manifest), "--model", "both", "--contrast", "mag", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}
