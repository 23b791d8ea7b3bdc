//! K-fold cross-validation over `(mu1, mu2)` grids and over SPLS sparsity levels.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IsplsError, Result};
use crate::ispls::{fit_ispls, IsplsConfig};
use crate::model::{build_cross_products, FitResult, MultiStudyData, PenaltySpec, StudyData};
use crate::pls::first_direction;
use crate::seed::{self, Stream};
use crate::spls::{fit_spls, Sparsity, SplsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningGrid {
    pub mu1_values: Vec<f64>,
    pub mu2_values: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl TuningGrid {
    pub const DEFAULT_MU2: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(IsplsError::invalid("folds", format!("must be at least 2, got {}", self.folds)));
        }
        for (name, values) in [("mu1_values", &self.mu1_values), ("mu2_values", &self.mu2_values)] {
            if values.is_empty() {
                return Err(IsplsError::invalid(name, "must not be empty"));
            }
            if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(IsplsError::invalid(name, "entries must be finite and >= 0"));
            }
            if values.windows(2).any(|w| w[1] < w[0]) {
                return Err(IsplsError::invalid(name, "must be sorted ascending"));
            }
        }
        Ok(())
    }
}

/// `max_{l,j} |(Z_l Z_l' w0_l)_j|` over datasets with a nonzero cross-product.
pub fn initial_gradient_scale(data: &MultiStudyData) -> f64 {
    build_cross_products(data)
        .iter()
        .filter_map(|cp| {
            first_direction(cp).ok().map(|w0| cp.gram_apply(&w0).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })
        .fold(0.0, f64::max)
}

/// Ten log-spaced `mu1` values on `[0.001 M, M]` and the fixed `mu2` ladder.
pub fn default_grid(data: &MultiStudyData) -> TuningGrid {
    let m = initial_gradient_scale(data);
    TuningGrid {
        mu1_values: (0..10).map(|k| m * 10f64.powf(-3.0 + k as f64 / 3.0)).collect(),
        mu2_values: TuningGrid::DEFAULT_MU2.to_vec(),
        folds: 5,
        seed: 0,
    }
}

/// Row indices of one study split into training and held-out parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded fold label of every row of a study with `n` rows.
pub fn fold_labels(n: usize, folds: usize, seed: u64, study: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed, Stream::Folds, &[study]));
    let mut labels = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = pos % folds;
    }
    labels
}

fn study_splits(n: usize, folds: usize, seed: u64, study: u64) -> Vec<Split> {
    let labels = fold_labels(n, folds, seed, study);
    (0..folds)
        .map(|f| Split {
            train: (0..n).filter(|&i| labels[i] != f).collect(),
            test: (0..n).filter(|&i| labels[i] == f).collect(),
        })
        .collect()
}

fn check_fold_sizes(id: &str, n: usize, folds: usize) -> Result<()> {
    if n < folds {
        return Err(IsplsError::Config(format!("study `{id}` has {n} rows, fewer than the {folds} folds")));
    }
    let largest_fold = n.div_ceil(folds);
    if n - largest_fold < 2 {
        return Err(IsplsError::Config(format!(
            "study `{id}`: {folds}-fold split leaves {} training rows; at least 2 are required",
            n - largest_fold
        )));
    }
    Ok(())
}

/// `splits[fold][study]`, stratified so every study contributes to every fold.
pub fn cv_splits(data: &MultiStudyData, folds: usize, seed: u64) -> Result<Vec<Vec<Split>>> {
    for s in data.studies() {
        check_fold_sizes(s.id(), s.n(), folds)?;
    }
    let per_study: Vec<Vec<Split>> =
        data.studies().iter().enumerate().map(|(l, s)| study_splits(s.n(), folds, seed, l as u64)).collect();
    Ok((0..folds).map(|f| per_study.iter().map(|splits| splits[f].clone()).collect()).collect())
}

/// `||Y - X beta||_F^2 / n`.
pub fn held_out_error(study: &StudyData, beta: &Array2<f64>) -> f64 {
    let resid = study.y() - &study.x().dot(beta);
    resid.iter().map(|r| r * r).sum::<f64>() / study.n() as f64
}

fn mean_study_error(test: &MultiStudyData, fit: &FitResult) -> f64 {
    test.studies().iter().zip(&fit.beta).map(|(s, b)| held_out_error(s, b)).sum::<f64>() / test.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub mu1_values: Vec<f64>,
    pub mu2_values: Vec<f64>,
    /// `scores[[i, k]]`: mean held-out error at `(mu1_values[i], mu2_values[k])`.
    pub scores: Array2<f64>,
    /// `per_fold[i][k][f]`.
    pub per_fold: Vec<Vec<Vec<f64>>>,
    pub best: (f64, f64),
    pub best_index: (usize, usize),
}

/// Penalty settings for one grid point: `b` follows `mu1`.
pub fn grid_spec(template: &PenaltySpec, mu1: f64, mu2: f64) -> PenaltySpec {
    PenaltySpec { mu1, mu2, b: None, ..*template }
}

pub fn cross_validate(data: &MultiStudyData, template: &PenaltySpec, grid: &TuningGrid) -> Result<CvResult> {
    cross_validate_with(data, &IsplsConfig::new(*template), grid)
}

/// Cross-validation with every solver setting other than `(mu1, mu2)` taken from `base`.
pub fn cross_validate_with(data: &MultiStudyData, base: &IsplsConfig, grid: &TuningGrid) -> Result<CvResult> {
    grid.validate()?;
    base.validate()?;
    let splits = cv_splits(data, grid.folds, grid.seed)?;
    let folds: Vec<(MultiStudyData, MultiStudyData)> = splits
        .iter()
        .map(|per_study| {
            let pick = |test: bool| -> Result<MultiStudyData> {
                let studies = data
                    .studies()
                    .iter()
                    .zip(per_study)
                    .map(|(s, sp)| s.subset(if test { &sp.test } else { &sp.train }))
                    .collect::<Result<Vec<_>>>()?;
                MultiStudyData::new(studies)
            };
            Ok((pick(false)?, pick(true)?))
        })
        .collect::<Result<_>>()?;

    let (n1, n2) = (grid.mu1_values.len(), grid.mu2_values.len());
    let cells: Vec<Result<Vec<f64>>> = (0..n1 * n2)
        .into_par_iter()
        .map(|cell| {
            let (i, k) = (cell / n2, cell % n2);
            let cfg =
                IsplsConfig { penalty: grid_spec(&base.penalty, grid.mu1_values[i], grid.mu2_values[k]), ..*base };
            folds.iter().map(|(train, test)| fit_ispls(train, &cfg).map(|fit| mean_study_error(test, &fit))).collect()
        })
        .collect();

    let mut scores = Array2::zeros((n1, n2));
    let mut per_fold = vec![vec![Vec::new(); n2]; n1];
    let mut best_index = (0, 0);
    for (cell, result) in cells.into_iter().enumerate() {
        let (i, k) = (cell / n2, cell % n2);
        let fold_scores = result?;
        scores[[i, k]] = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        per_fold[i][k] = fold_scores;
        if scores[[i, k]] <= scores[best_index] {
            best_index = (i, k);
        }
    }
    Ok(CvResult {
        best: (grid.mu1_values[best_index.0], grid.mu2_values[best_index.1]),
        mu1_values: grid.mu1_values.clone(),
        mu2_values: grid.mu2_values.clone(),
        scores,
        per_fold,
        best_index,
    })
}

/// Sparsity fractions searched by the SPLS baselines.
pub const DEFAULT_ETAS: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplsCvResult {
    pub etas: Vec<f64>,
    pub scores: Vec<f64>,
    pub best_eta: f64,
}

/// Single-study cross-validation of the sparsity fraction; ties go to the larger fraction.
pub fn cross_validate_spls(
    study: &StudyData,
    etas: &[f64],
    kappa: f64,
    folds: usize,
    seed: u64,
    stream: u64,
) -> Result<SplsCvResult> {
    if etas.is_empty() {
        return Err(IsplsError::invalid("etas", "must not be empty"));
    }
    if folds < 2 {
        return Err(IsplsError::invalid("folds", format!("must be at least 2, got {folds}")));
    }
    check_fold_sizes(study.id(), study.n(), folds)?;
    let parts: Vec<(StudyData, StudyData)> = study_splits(study.n(), folds, seed, stream)
        .iter()
        .map(|sp| Ok((study.subset(&sp.train)?, study.subset(&sp.test)?)))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = etas
        .par_iter()
        .map(|&eta| {
            let cfg = SplsConfig { kappa, ..SplsConfig::with_sparsity(Sparsity::Fraction(eta)) };
            let mut total = 0.0;
            for (train, test) in &parts {
                let fit = fit_spls(train.x(), train.y(), &cfg)?;
                total += held_out_error(test, &fit.beta[0]);
            }
            Ok(total / parts.len() as f64)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s <= scores[best] {
            best = i;
        }
    }
    Ok(SplsCvResult { etas: etas.to_vec(), best_eta: etas[best], scores })
}
