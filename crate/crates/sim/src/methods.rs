//! The seven compared methods: two per-study baselines, a pooled baseline and four iSPLS variants.

use std::fmt;

use ispls_core::ispls::fit_ispls;
use ispls_core::tuning::{cross_validate_spls, cross_validate_with, default_grid, grid_spec, TuningGrid, DEFAULT_ETAS};
use ispls_core::{
    fit_spls, latent_regress, refit_selected, Contrast, FitResult, IsplsConfig, IsplsError, Model, MultiStudyData,
    PenaltySpec, Result, Sparsity, SplsConfig,
};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MetaPls,
    MetaSpls,
    PooledSpls,
    IsplsHomoM,
    IsplsHomoS,
    IsplsHeteroM,
    IsplsHeteroS,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::MetaPls,
        Method::MetaSpls,
        Method::PooledSpls,
        Method::IsplsHomoM,
        Method::IsplsHomoS,
        Method::IsplsHeteroM,
        Method::IsplsHeteroS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MetaPls => "meta_pls",
            Method::MetaSpls => "meta_spls",
            Method::PooledSpls => "pooled_spls",
            Method::IsplsHomoM => "ispls_homo_m",
            Method::IsplsHomoS => "ispls_homo_s",
            Method::IsplsHeteroM => "ispls_hetero_m",
            Method::IsplsHeteroS => "ispls_hetero_s",
        }
    }

    /// Model and contrast of the iSPLS variants.
    pub fn penalty(self) -> Option<(Model, Contrast)> {
        match self {
            Method::IsplsHomoM => Some((Model::Homogeneity, Contrast::Magnitude)),
            Method::IsplsHomoS => Some((Model::Homogeneity, Contrast::Sign)),
            Method::IsplsHeteroM => Some((Model::Heterogeneity, Contrast::Magnitude)),
            Method::IsplsHeteroS => Some((Model::Heterogeneity, Contrast::Sign)),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Tuning choices shared by all methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOptions {
    pub folds: usize,
    /// Root of the fold assignments.
    pub seed: u64,
    /// Sparsity fractions searched by the SPLS baselines.
    pub etas: Vec<f64>,
    pub kappa: f64,
    /// Overrides the data-driven `mu1` ladder.
    pub mu1_values: Option<Vec<f64>>,
    pub mu2_values: Vec<f64>,
    #[serde(default)]
    pub prediction: Prediction,
    #[serde(default)]
    pub meta_combination: MetaCombination,
}

/// How coefficient matrices are formed from the estimated directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// Rank-one `w q'` from the final direction.
    #[default]
    RankOne,
    /// Least squares on the selected variables.
    RefitSelected,
}

/// How the per-study baselines report their estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaCombination {
    #[default]
    PerStudy,
    /// Sign-aligned average of the per-study directions, renormalized and shared.
    CombinedDirection,
}

impl Default for MethodOptions {
    fn default() -> Self {
        MethodOptions {
            folds: 5,
            seed: 0,
            etas: DEFAULT_ETAS.to_vec(),
            kappa: 0.5,
            mu1_values: None,
            mu2_values: TuningGrid::DEFAULT_MU2.to_vec(),
            prediction: Prediction::RankOne,
            meta_combination: MetaCombination::PerStudy,
        }
    }
}

impl MethodOptions {
    pub fn grid(&self, data: &MultiStudyData) -> TuningGrid {
        let mut grid = default_grid(data);
        if let Some(m) = &self.mu1_values {
            grid.mu1_values = m.clone();
        }
        grid.mu2_values = self.mu2_values.clone();
        grid.folds = self.folds;
        grid.seed = self.seed;
        grid
    }
}

/// Tuning parameters chosen for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Tuned {
    None,
    /// Sparsity fraction per study.
    Eta {
        etas: Vec<f64>,
    },
    Mu {
        mu1: f64,
        mu2: f64,
    },
}

/// Per-study outcome of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub method: Method,
    pub directions: Vec<Array1<f64>>,
    pub selected: Vec<Vec<bool>>,
    pub beta: Vec<Array2<f64>>,
    pub tuned: Tuned,
    pub converged: bool,
}

/// Study index used to separate the fold stream of the pooled fit from per-study streams.
const POOLED_STREAM: u64 = 1 << 32;

/// Chooses the tuning parameters of `method` by cross-validation on `data`.
pub fn tune_method(method: Method, data: &MultiStudyData, opts: &MethodOptions) -> Result<Tuned> {
    let spls_cv = |study, stream| cross_validate_spls(study, &opts.etas, opts.kappa, opts.folds, opts.seed, stream);
    match method {
        Method::MetaPls => Ok(Tuned::None),
        Method::MetaSpls => {
            let etas = data
                .studies()
                .iter()
                .enumerate()
                .map(|(l, s)| spls_cv(s, l as u64).map(|r| r.best_eta))
                .collect::<Result<_>>()?;
            Ok(Tuned::Eta { etas })
        }
        Method::PooledSpls => {
            let eta = spls_cv(&data.pooled()?, POOLED_STREAM)?.best_eta;
            Ok(Tuned::Eta { etas: vec![eta] })
        }
        _ => {
            let cfg = ispls_config(method, 0.0, 0.0, opts)?;
            let cv = cross_validate_with(data, &cfg, &opts.grid(data))?;
            Ok(Tuned::Mu { mu1: cv.best.0, mu2: cv.best.1 })
        }
    }
}

fn ispls_config(method: Method, mu1: f64, mu2: f64, opts: &MethodOptions) -> Result<IsplsConfig> {
    let (model, contrast) =
        method.penalty().ok_or_else(|| IsplsError::invalid("method", format!("{method} is not an iSPLS variant")))?;
    let mut spec = grid_spec(&PenaltySpec::new(model, contrast), mu1, mu2);
    spec.kappa = opts.kappa;
    Ok(IsplsConfig::new(spec))
}

fn spls(x: &Array2<f64>, y: &Array2<f64>, eta: f64, kappa: f64) -> Result<FitResult> {
    let sparsity = if eta == 0.0 { Sparsity::Absolute(0.0) } else { Sparsity::Fraction(eta) };
    fit_spls(x, y, &SplsConfig { kappa, ..SplsConfig::with_sparsity(sparsity) })
}

/// Fits `method` on `data` at already chosen tuning parameters.
pub fn fit_method(method: Method, data: &MultiStudyData, tuned: &Tuned, opts: &MethodOptions) -> Result<MethodFit> {
    let mismatch = || IsplsError::invalid("tuned", format!("parameters {tuned:?} do not fit {method}"));
    let mut out = MethodFit {
        method,
        directions: Vec::new(),
        selected: Vec::new(),
        beta: Vec::new(),
        tuned: tuned.clone(),
        converged: true,
    };
    let push = |out: &mut MethodFit, fit: FitResult| {
        out.converged &= fit.converged;
        out.directions.extend(fit.directions);
        out.selected.extend(fit.selected);
        out.beta.extend(fit.beta);
    };
    match (method, tuned) {
        (Method::MetaPls, Tuned::None) => {
            for s in data.studies() {
                push(&mut out, spls(s.x(), s.y(), 0.0, opts.kappa)?);
            }
        }
        (Method::MetaSpls, Tuned::Eta { etas }) if etas.len() == data.len() => {
            for (s, &eta) in data.studies().iter().zip(etas) {
                push(&mut out, spls(s.x(), s.y(), eta, opts.kappa)?);
            }
        }
        (Method::PooledSpls, Tuned::Eta { etas }) if etas.len() == 1 => {
            let pooled = data.pooled()?;
            let fit = spls(pooled.x(), pooled.y(), etas[0], opts.kappa)?;
            for _ in 0..data.len() {
                push(&mut out, fit.clone());
            }
            out.converged = fit.converged;
        }
        (m, Tuned::Mu { mu1, mu2 }) if m.penalty().is_some() => {
            push(&mut out, fit_ispls(data, &ispls_config(m, *mu1, *mu2, opts)?)?);
        }
        _ => return Err(mismatch()),
    }
    if opts.meta_combination == MetaCombination::CombinedDirection
        && matches!(method, Method::MetaPls | Method::MetaSpls)
    {
        combine_directions(&mut out, data)?;
    }
    if opts.prediction == Prediction::RefitSelected {
        if method == Method::PooledSpls {
            let pooled = data.pooled()?;
            let beta = refit_selected(pooled.x(), pooled.y(), &out.selected[0])?;
            out.beta = vec![beta; data.len()];
        } else {
            out.beta = data
                .studies()
                .iter()
                .zip(&out.selected)
                .map(|(s, sel)| refit_selected(s.x(), s.y(), sel))
                .collect::<Result<_>>()?;
        }
    }
    Ok(out)
}

fn combine_directions(out: &mut MethodFit, data: &MultiStudyData) -> Result<()> {
    let p = data.p();
    let mut avg = Array1::<f64>::zeros(p);
    let mut anchor: Option<Array1<f64>> = None;
    for d in &out.directions {
        if d.iter().all(|v| *v == 0.0) {
            continue;
        }
        let a = anchor.get_or_insert_with(|| d.clone());
        let sign = if a.dot(d) < 0.0 { -1.0 } else { 1.0 };
        avg.scaled_add(sign, d);
    }
    let norm = avg.dot(&avg).sqrt();
    let shared = if norm > 0.0 { avg / norm } else { avg };
    out.beta = data
        .studies()
        .iter()
        .map(|s| {
            if norm > 0.0 {
                latent_regress(s.x(), s.y(), &shared).map(|m| m.beta)
            } else {
                Ok(Array2::zeros((p, s.q())))
            }
        })
        .collect::<Result<_>>()?;
    out.selected = vec![shared.iter().map(|v| *v != 0.0).collect(); data.len()];
    out.directions = vec![shared; data.len()];
    Ok(())
}

/// Tunes and fits `method` on `data`.
pub fn run_method(method: Method, data: &MultiStudyData, opts: &MethodOptions) -> Result<MethodFit> {
    let tuned = tune_method(method, data, opts)?;
    fit_method(method, data, &tuned, opts)
}
