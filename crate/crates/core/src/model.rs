//! Domain data model: studies, cross-products, penalty configuration, fit results.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{IsplsError, Result};

/// One dataset: `n x p` predictors paired with `n x q` responses.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyData {
    id: String,
    x: Array2<f64>,
    y: Array2<f64>,
}

impl StudyData {
    pub fn new(id: impl Into<String>, x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        let id = id.into();
        if x.nrows() != y.nrows() {
            return Err(IsplsError::DimensionMismatch {
                study: id,
                detail: format!("X has {} rows but Y has {}", x.nrows(), y.nrows()),
            });
        }
        if x.nrows() < 2 {
            return Err(IsplsError::TooFewRows { study: id, rows: x.nrows(), min: 2 });
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(IsplsError::DimensionMismatch {
                study: id,
                detail: "X and Y need at least one column each".into(),
            });
        }
        for (matrix, m) in [("X", &x), ("Y", &y)] {
            if let Some(((row, col), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(IsplsError::NonFinite { study: id, matrix, row, col });
            }
        }
        Ok(StudyData { id, x, y })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    /// Rows selected by `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Result<StudyData> {
        StudyData::new(self.id.clone(), self.x.select(Axis(0), rows), self.y.select(Axis(0), rows))
    }

    pub fn into_parts(self) -> (String, Array2<f64>, Array2<f64>) {
        (self.id, self.x, self.y)
    }
}

/// `L >= 2` studies over the same `p` predictors (matched by position) and `q` responses.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStudyData {
    studies: Vec<StudyData>,
}

impl MultiStudyData {
    pub fn new(studies: Vec<StudyData>) -> Result<Self> {
        if studies.len() < 2 {
            return Err(IsplsError::TooFewStudies { got: studies.len(), min: 2 });
        }
        let (p, q) = (studies[0].p(), studies[0].q());
        for s in &studies[1..] {
            if s.p() != p || s.q() != q {
                return Err(IsplsError::DimensionMismatch {
                    study: s.id.clone(),
                    detail: format!("shape p={}, q={} differs from `{}` (p={p}, q={q})", s.p(), s.q(), studies[0].id),
                });
            }
        }
        Ok(MultiStudyData { studies })
    }

    pub fn studies(&self) -> &[StudyData] {
        &self.studies
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn p(&self) -> usize {
        self.studies[0].p()
    }

    pub fn q(&self) -> usize {
        self.studies[0].q()
    }

    /// Same studies in a new order; `order[k]` is the index of the study placed at `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<MultiStudyData> {
        MultiStudyData::new(order.iter().map(|&i| self.studies[i].clone()).collect())
    }

    /// Row-wise concatenation of all studies.
    pub fn pooled(&self) -> Result<StudyData> {
        let xs: Vec<_> = self.studies.iter().map(|s| s.x.view()).collect();
        let ys: Vec<_> = self.studies.iter().map(|s| s.y.view()).collect();
        let x = ndarray::concatenate(Axis(0), &xs).expect("equal column counts");
        let y = ndarray::concatenate(Axis(0), &ys).expect("equal column counts");
        StudyData::new("pooled", x, y)
    }

    pub fn into_studies(self) -> Vec<StudyData> {
        self.studies
    }
}

/// `Z = X'Y` for one study together with its sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossProduct {
    pub z: Array2<f64>,
    pub n: usize,
}

impl CrossProduct {
    pub fn from_study(study: &StudyData) -> Self {
        CrossProduct { z: study.x.t().dot(&study.y), n: study.n() }
    }

    /// `Z Z' v`, computed as `Z (Z' v)` so the `p x p` product is never formed.
    pub fn gram_apply(&self, v: &Array1<f64>) -> Array1<f64> {
        self.z.dot(&self.z.t().dot(v))
    }

    pub fn is_zero(&self) -> bool {
        self.z.iter().all(|v| *v == 0.0)
    }
}

pub fn build_cross_products(data: &MultiStudyData) -> Vec<CrossProduct> {
    data.studies.iter().map(CrossProduct::from_study).collect()
}

/// A predictor column whose variance vanished in a study, so it could only be centered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroVarianceColumn {
    pub study: String,
    pub column: usize,
}

/// Per-study column centering and scaling to unit sample standard deviation.
///
/// Responses are centered (never scaled) when `center` is set. Zero-variance
/// predictor columns are left centered-only and reported.
pub fn standardize(data: &MultiStudyData, center: bool, scale: bool) -> (MultiStudyData, Vec<ZeroVarianceColumn>) {
    let mut warnings = Vec::new();
    let studies = data
        .studies
        .iter()
        .map(|s| {
            let mut x = s.x.clone();
            let mut y = s.y.clone();
            let n = s.n() as f64;
            for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
                let mean = col.sum() / n;
                if center {
                    col.mapv_inplace(|v| v - mean);
                }
                if scale {
                    let m = if center { 0.0 } else { mean };
                    let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
                    let sd = var.sqrt();
                    if sd > 0.0 && sd.is_finite() {
                        col.mapv_inplace(|v| (v - m) / sd + m);
                    } else {
                        warnings.push(ZeroVarianceColumn { study: s.id.clone(), column: j });
                    }
                }
            }
            if center {
                for mut col in y.axis_iter_mut(Axis(1)) {
                    let mean = col.sum() / n;
                    col.mapv_inplace(|v| v - mean);
                }
            }
            StudyData { id: s.id.clone(), x, y }
        })
        .collect();
    (MultiStudyData { studies }, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Homogeneity,
    Heterogeneity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contrast {
    Magnitude,
    Sign,
}

/// Structural model, contrast kind and every scalar of the two-part penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    pub model: Model,
    pub contrast: Contrast,
    /// Selection strength.
    pub mu1: f64,
    /// Contrast strength.
    pub mu2: f64,
    /// Inner MCP concavity.
    pub a: f64,
    /// Outer MCP concavity of the composite penalty; derived from `mu1` when unset.
    pub b: Option<f64>,
    /// Smoothing constant of the sign surrogate.
    pub tau2: f64,
    pub kappa: f64,
}

impl PenaltySpec {
    pub const DEFAULT_A: f64 = 6.0;
    pub const DEFAULT_TAU2: f64 = 0.5;
    pub const DEFAULT_KAPPA: f64 = 0.5;

    pub fn new(model: Model, contrast: Contrast) -> Self {
        PenaltySpec {
            model,
            contrast,
            mu1: 0.0,
            mu2: 0.0,
            a: Self::DEFAULT_A,
            b: None,
            tau2: Self::DEFAULT_TAU2,
            kappa: Self::DEFAULT_KAPPA,
        }
    }

    pub fn with_mu(mut self, mu1: f64, mu2: f64) -> Self {
        self.mu1 = mu1;
        self.mu2 = mu2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 >= 0.0 && self.mu1.is_finite()) {
            return Err(IsplsError::invalid("mu1", format!("must be finite and >= 0, got {}", self.mu1)));
        }
        if !(self.mu2 >= 0.0 && self.mu2.is_finite()) {
            return Err(IsplsError::invalid("mu2", format!("must be finite and >= 0, got {}", self.mu2)));
        }
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(IsplsError::invalid("a", format!("must be finite and > 1, got {}", self.a)));
        }
        if let Some(b) = self.b {
            if !(b > 1.0 && b.is_finite()) {
                return Err(IsplsError::invalid("b", format!("must be finite and > 1, got {b}")));
            }
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(IsplsError::invalid("tau2", format!("must be finite and > 0, got {}", self.tau2)));
        }
        if !(self.kappa > 0.0 && self.kappa <= 0.5) {
            return Err(IsplsError::invalid("kappa", format!("must lie in (0, 0.5], got {}", self.kappa)));
        }
        Ok(())
    }

    /// `b`, or `L * a * mu1^2 / 2` when unset.
    pub fn outer_gamma(&self, n_studies: usize) -> f64 {
        self.b.unwrap_or(0.5 * n_studies as f64 * self.a * self.mu1 * self.mu1)
    }

    /// Copy with `b` filled in, as used for a fit on `n_studies` studies.
    pub fn resolved(&self, n_studies: usize) -> PenaltySpec {
        let mut out = *self;
        if self.model == Model::Heterogeneity {
            out.b = Some(self.outer_gamma(n_studies));
        }
        out
    }
}

/// Per-study direction vectors and their surrogates during the alternating iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionState {
    pub w: Vec<Array1<f64>>,
    pub c: Vec<Array1<f64>>,
    pub iteration: usize,
}

/// Outcome of a fit on one or more studies.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Unit-norm direction per study; all zeros when the study was fully penalized.
    pub directions: Vec<Array1<f64>>,
    /// `selected[l][j]` iff `directions[l][j] != 0`.
    pub selected: Vec<Vec<bool>>,
    /// Rank-one `p x q` coefficient matrix per study.
    pub beta: Vec<Array2<f64>>,
    /// Response loadings of the single latent component, per study.
    pub q_loads: Vec<Array1<f64>>,
    /// Final surrogate directions before normalization.
    pub surrogates: Vec<Array1<f64>>,
    pub fully_penalized: Vec<bool>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn n_studies(&self) -> usize {
        self.directions.len()
    }

    pub fn n_selected(&self, study: usize) -> usize {
        self.selected[study].iter().filter(|s| **s).count()
    }
}

pub(crate) fn selection_pattern(v: &Array1<f64>) -> Vec<bool> {
    v.iter().map(|x| *x != 0.0).collect()
}
