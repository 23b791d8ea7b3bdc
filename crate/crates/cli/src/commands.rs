//! Command bodies. Each takes a validated [`RunConfig`] and an output directory;
//! everything a command writes is a function of the configuration alone.

use std::path::Path;

use ispls_core::tuning::{cross_validate_with, grid_spec};
use ispls_core::{
    default_grid, fit_ispls, standardize, FitResult, IsplsConfig, MultiStudyData, TuningGrid, ZeroVarianceColumn,
};
use ispls_sim::{gen_scenario, ooi_study, run_benchmark, BenchmarkReport};
use ndarray::Array2;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CvRun, FitRun, OoiRun, RunConfig, RunManifest, SimulateRun};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, read_studies, write_flags, write_json, write_matrix, write_table, Manifest, StudyEntry};

pub const RUN_FILE: &str = "run.json";

/// Runs `config` and writes its outputs plus `run.json` into `out`.
pub fn execute(config: &RunConfig, out: &Path) -> CliResult<Value> {
    config.validate()?;
    ensure_dir(out)?;
    let result = match config {
        RunConfig::Fit(f) => fit(f, out)?,
        RunConfig::Cv(c) => cv(c, out)?,
        RunConfig::Simulate(s) => simulate(s, out)?,
        RunConfig::Benchmark(b) => benchmark(&run_benchmark(b)?, out)?,
        RunConfig::Ooi(o) => ooi(o, out)?,
    };
    let manifest =
        RunManifest { version: env!("CARGO_PKG_VERSION").to_string(), config: config.clone(), result: result.clone() };
    write_json(&out.join(RUN_FILE), &manifest)?;
    Ok(result)
}

pub fn load_data(manifest: &Path, standardized: bool) -> CliResult<(MultiStudyData, Vec<ZeroVarianceColumn>)> {
    let data = read_studies(manifest)?;
    Ok(if standardized { standardize(&data, true, true) } else { (data, Vec::new()) })
}

/// The default grid for the (possibly standardized) data behind `manifest`.
pub fn resolve_grid(manifest: &Path, standardized: bool, folds: usize, seed: u64) -> CliResult<TuningGrid> {
    let (data, _) = load_data(manifest, standardized)?;
    Ok(TuningGrid { folds, seed, ..default_grid(&data) })
}

fn rows_to_matrix(rows: &[ndarray::Array1<f64>]) -> Array2<f64> {
    let p = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), p), |(l, j)| rows[l][j])
}

fn write_fit(out: &Path, fit: &FitResult, warnings: &[ZeroVarianceColumn]) -> CliResult<Value> {
    write_matrix(&out.join("directions.csv"), &rows_to_matrix(&fit.directions))?;
    write_flags(&out.join("selection.csv"), &fit.selected)?;
    for (l, b) in fit.beta.iter().enumerate() {
        write_matrix(&out.join(format!("beta_{}.csv", l + 1)), b)?;
    }
    Ok(json!({
        "converged": fit.converged,
        "iterations": fit.iterations,
        "objective_trace": fit.objective_trace,
        "n_selected": (0..fit.n_studies()).map(|l| fit.n_selected(l)).collect::<Vec<_>>(),
        "fully_penalized": fit.fully_penalized,
        "zero_variance_columns": warnings,
    }))
}

fn fit(run: &FitRun, out: &Path) -> CliResult<Value> {
    let (data, warnings) = load_data(&run.manifest, run.standardize)?;
    let fit = fit_ispls(&data, &run.solver)?;
    write_fit(out, &fit, &warnings)
}

#[derive(Serialize)]
struct CvScoreRow {
    mu1: f64,
    mu2: f64,
    score: f64,
}

fn cv(run: &CvRun, out: &Path) -> CliResult<Value> {
    let (data, warnings) = load_data(&run.manifest, run.standardize)?;
    let cv = cross_validate_with(&data, &run.solver, &run.grid)?;
    let mut rows = Vec::new();
    for (i, mu1) in cv.mu1_values.iter().enumerate() {
        for (k, mu2) in cv.mu2_values.iter().enumerate() {
            rows.push(CvScoreRow { mu1: *mu1, mu2: *mu2, score: cv.scores[[i, k]] });
        }
    }
    write_table(&out.join("cv_scores.csv"), &rows)?;
    let best = json!({
        "mu1": cv.best.0,
        "mu2": cv.best.1,
        "mu1_index": cv.best_index.0,
        "mu2_index": cv.best_index.1,
        "score": cv.scores[cv.best_index],
    });
    write_json(&out.join("best.json"), &best)?;
    let solver = IsplsConfig { penalty: grid_spec(&run.solver.penalty, cv.best.0, cv.best.1), ..run.solver };
    let fit = fit_ispls(&data, &solver)?;
    let fit = write_fit(out, &fit, &warnings)?;
    Ok(json!({ "best": best, "fit": fit }))
}

fn simulate(run: &SimulateRun, out: &Path) -> CliResult<Value> {
    let (data, truth) = gen_scenario(&run.spec)?;
    let mut studies = Vec::new();
    for (l, s) in data.studies().iter().enumerate() {
        let (x, y) = (format!("study_{}_x.csv", l + 1), format!("study_{}_y.csv", l + 1));
        write_matrix(&out.join(&x), s.x())?;
        write_matrix(&out.join(&y), s.y())?;
        studies.push(StudyEntry { id: s.id().to_string(), x: x.into(), y: y.into() });
    }
    write_json(&out.join("manifest.json"), &Manifest { studies })?;
    write_flags(&out.join("truth_support.csv"), &truth.support)?;
    write_matrix(&out.join("truth_beta1.csv"), &truth.beta1)?;
    Ok(json!({
        "support_size": truth.support.iter().map(|r| r.iter().filter(|s| **s).count()).collect::<Vec<_>>(),
    }))
}

/// One benchmark cell, with the tuned parameters as a JSON string.
#[derive(Serialize)]
struct CellRow {
    scenario_index: usize,
    replicate: usize,
    method: ispls_sim::Method,
    converged: bool,
    tuned: String,
    error: String,
}

/// Writes the long, summary, loading and cell tables of a benchmark.
pub fn benchmark(report: &BenchmarkReport, out: &Path) -> CliResult<Value> {
    write_table(&out.join("results_long.csv"), &report.records)?;
    write_table(&out.join("results_summary.csv"), &report.summary)?;
    write_table(&out.join("loadings.csv"), &report.loadings)?;
    let cells: Vec<CellRow> = report
        .cells
        .iter()
        .map(|c| CellRow {
            scenario_index: c.scenario_index,
            replicate: c.replicate,
            method: c.method,
            converged: c.converged,
            tuned: c.tuned.as_ref().map(|t| serde_json::to_string(t).unwrap_or_default()).unwrap_or_default(),
            error: c.error.clone().unwrap_or_default(),
        })
        .collect();
    write_table(&out.join("cells.csv"), &cells)?;
    let failures: Vec<Value> = report
        .failures()
        .map(|c| json!({"scenario_index": c.scenario_index, "replicate": c.replicate, "method": c.method, "error": c.error}))
        .collect();
    Ok(json!({
        "cells": report.cells.len(),
        "failed_cells": failures,
        "non_converged_cells": report.cells.iter().filter(|c| c.error.is_none() && !c.converged).count(),
    }))
}

fn ooi(run: &OoiRun, out: &Path) -> CliResult<Value> {
    let (data, warnings) = load_data(&run.manifest, run.standardize)?;
    let report = ooi_study(&data, &run.ooi)?;
    write_table(&out.join("ooi.csv"), &report.rows)?;
    write_table(&out.join("ooi_summary.csv"), &report.summary)?;
    Ok(json!({ "tuned": report.tuned, "zero_variance_columns": warnings }))
}

/// Re-runs the configuration stored in a run manifest.
pub fn replay(run_file: &Path, out: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(run_file).map_err(|e| CliError::io(run_file.display(), e))?;
    let config = crate::config::parse_run(&text, &run_file.display().to_string())?;
    execute(&config, out)
}
