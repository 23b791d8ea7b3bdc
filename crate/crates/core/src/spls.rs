//! Single-dataset sparse PLS with the infinite-ridge c-step.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{IsplsError, Result};
use crate::model::{selection_pattern, CrossProduct, FitResult, StudyData};
use crate::penalty::soft_threshold;
use crate::pls::{first_direction, latent_regress, left_singular, LatentModel};

/// Soft-threshold level of the c-step, on the scale of `|(ZZ'w)_j|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Sparsity {
    Absolute(f64),
    /// Fraction `eta` in `[0, 1)` of `max_j |(ZZ'w0)_j|` at the PLS initialization.
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplsConfig {
    pub kappa: f64,
    pub sparsity: Sparsity,
    pub max_iter: usize,
    /// Relative tolerance on `||c_new - c_old|| / ||c_old||`.
    pub tol: f64,
}

impl Default for SplsConfig {
    fn default() -> Self {
        SplsConfig { kappa: 0.5, sparsity: Sparsity::Absolute(0.0), max_iter: 200, tol: 1e-4 }
    }
}

impl SplsConfig {
    pub fn with_sparsity(sparsity: Sparsity) -> Self {
        SplsConfig { sparsity, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 0.5) {
            return Err(IsplsError::invalid("kappa", format!("must lie in (0, 0.5], got {}", self.kappa)));
        }
        if !(self.tol > 0.0) {
            return Err(IsplsError::invalid("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(IsplsError::invalid("max_iter", "must be at least 1"));
        }
        match self.sparsity {
            Sparsity::Absolute(l) if !(l >= 0.0 && l.is_finite()) => {
                Err(IsplsError::invalid("lambda1", format!("must be finite and >= 0, got {l}")))
            }
            Sparsity::Fraction(e) if !(0.0..1.0).contains(&e) => {
                Err(IsplsError::invalid("eta", format!("must lie in [0, 1), got {e}")))
            }
            _ => Ok(()),
        }
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Unit-norm w-step for a fixed surrogate `c`.
pub fn spls_w_step(cp: &CrossProduct, c: &Array1<f64>, kappa: f64) -> Result<Array1<f64>> {
    let g = cp.gram_apply(c);
    let gn = norm(&g);
    if gn == 0.0 || !gn.is_finite() {
        return Err(IsplsError::OrthogonalSurrogate);
    }
    if kappa >= 0.5 {
        return Ok(g / gn);
    }
    let kp = (1.0 - kappa) / (1.0 - 2.0 * kappa);
    let target = 1.0 / (kp * kp);
    let (sigma, u) = left_singular(&cp.z);
    let s2: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let proj: Vec<f64> = u.iter().map(|ui| ui.dot(c)).collect();
    let phi = |lam: f64| -> f64 {
        s2.iter()
            .zip(&proj)
            .map(|(s, a)| {
                let r = s * a / (s + lam);
                r * r
            })
            .sum()
    };
    if phi(0.0) < target {
        return Ok(g / gn);
    }
    let mut lo = 0.0;
    let mut hi = s2[0];
    while phi(hi) >= target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if phi(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    let mut w = Array1::zeros(c.len());
    for ((s, a), ui) in s2.iter().zip(&proj).zip(&u) {
        w.scaled_add(kp * s * a / (s + lam), ui);
    }
    let wn = norm(&w);
    Ok(w / wn)
}

/// `1/2 ||c||^2 - w'ZZ'c + lambda1 ||c||_1`, the quantity both half-steps decrease at `kappa = 0.5`.
pub fn spls_objective(cp: &CrossProduct, w: &Array1<f64>, c: &Array1<f64>, lambda1: f64) -> f64 {
    let g = cp.gram_apply(w);
    0.5 * c.dot(c) - g.dot(c) + lambda1 * c.iter().map(|v| v.abs()).sum::<f64>()
}

fn c_step(g: &Array1<f64>, lambda1: f64) -> Array1<f64> {
    g.mapv(|s| soft_threshold(s, lambda1))
}

/// Threshold level implied by `sparsity` for a given initialization.
pub fn resolve_lambda(cp: &CrossProduct, w0: &Array1<f64>, sparsity: Sparsity) -> f64 {
    match sparsity {
        Sparsity::Absolute(l) => l,
        Sparsity::Fraction(eta) => eta * cp.gram_apply(w0).iter().fold(0.0f64, |m, v| m.max(v.abs())),
    }
}

/// Alternating w/c iteration on one dataset.
pub fn fit_spls(x: &Array2<f64>, y: &Array2<f64>, cfg: &SplsConfig) -> Result<FitResult> {
    cfg.validate()?;
    let study = StudyData::new("spls", x.clone(), y.clone())?;
    let cp = CrossProduct::from_study(&study);
    let w0 = first_direction(&cp)?;
    let lambda1 = resolve_lambda(&cp, &w0, cfg.sparsity);
    let p = study.p();

    let mut w = w0;
    let mut c = c_step(&cp.gram_apply(&w), lambda1);
    let mut trace = vec![spls_objective(&cp, &w, &c, lambda1)];
    let mut converged = false;
    let mut iterations = 0;
    let mut fully_penalized = c.iter().all(|v| *v == 0.0);
    if fully_penalized {
        converged = true;
    }
    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        w = spls_w_step(&cp, &c, cfg.kappa)?;
        let c_new = c_step(&cp.gram_apply(&w), lambda1);
        let delta = norm(&(&c_new - &c));
        let scale = norm(&c);
        c = c_new;
        trace.push(spls_objective(&cp, &w, &c, lambda1));
        if c.iter().all(|v| *v == 0.0) {
            fully_penalized = true;
            converged = true;
        } else if delta <= cfg.tol * scale {
            converged = true;
        }
    }

    let (direction, model) = if fully_penalized {
        (Array1::zeros(p), LatentModel::zero(p, study.q()))
    } else {
        let d = &c / norm(&c);
        let m = latent_regress(x, y, &d)?;
        (d, m)
    };
    Ok(FitResult {
        selected: vec![selection_pattern(&direction)],
        directions: vec![direction],
        beta: vec![model.beta],
        q_loads: vec![model.q_load],
        surrogates: vec![c],
        fully_penalized: vec![fully_penalized],
        objective_trace: trace,
        converged,
        iterations,
    })
}
