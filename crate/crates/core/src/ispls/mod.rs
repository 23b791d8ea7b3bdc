//! The integrative solver: alternating w-steps and joint c-steps across datasets.

mod block;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{IsplsError, Result};
use crate::model::{
    build_cross_products, selection_pattern, Contrast, CrossProduct, DirectionState, FitResult, Model, MultiStudyData,
    PenaltySpec,
};
use crate::penalty::{composite_weight_lla, group_norm, mcp, mcp_slope, smooth_sign, soft_threshold, McpParams};
use crate::pls::{first_direction, latent_regress, LatentModel};
use crate::spls::spls_w_step;

/// Curvature used for the sign contrast in the c-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignDenominator {
    /// `1 + mu2*(L-1)/(c^2 + tau2)`, solved exactly per coordinate.
    #[default]
    Derived,
    /// `(1 + mu2*(L-1))/(c^2 + tau2)`, iterated as a plain fixed-point map.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsplsConfig {
    pub penalty: PenaltySpec,
    pub outer_max_iter: usize,
    /// Relative tolerance on `sum_l ||c_new - c_old|| / sum_l ||c_old||`.
    pub outer_tol: f64,
    /// Fixed-point iterations per coordinate; only used by [`SignDenominator::Printed`].
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub sweep_max: usize,
    #[serde(default)]
    pub sign_denominator: SignDenominator,
}

impl IsplsConfig {
    pub fn new(penalty: PenaltySpec) -> Self {
        IsplsConfig {
            penalty,
            outer_max_iter: 100,
            outer_tol: 1e-4,
            inner_max_iter: 50,
            inner_tol: 1e-6,
            sweep_max: 100,
            sign_denominator: SignDenominator::Derived,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        for (name, v) in [("outer_tol", self.outer_tol), ("inner_tol", self.inner_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IsplsError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("outer_max_iter", self.outer_max_iter),
            ("inner_max_iter", self.inner_max_iter),
            ("sweep_max", self.sweep_max),
        ] {
            if v == 0 {
                return Err(IsplsError::invalid(name, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Per-dataset contrast strengths `mu2* = mu2 * n_l^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastWeights {
    pub mu2_star: Vec<f64>,
}

impl ContrastWeights {
    pub fn new(mu2: f64, cps: &[CrossProduct]) -> Self {
        ContrastWeights { mu2_star: cps.iter().map(|cp| mu2 * (cp.n as f64).powi(2)).collect() }
    }
}

/// The joint c-step problem for fixed directions `w`.
#[derive(Debug, Clone)]
pub struct CStepProblem {
    spec: PenaltySpec,
    outer_gamma: f64,
    denominator: SignDenominator,
    inner_max_iter: usize,
    inner_tol: f64,
    g: Vec<Array1<f64>>,
    omega: Vec<f64>,
    mu2_star: Vec<f64>,
    active: Vec<usize>,
    p: usize,
}

impl CStepProblem {
    /// `active` lists the datasets that take part; the rest keep zero surrogates.
    pub fn new(
        cps: &[CrossProduct],
        w: &[Array1<f64>],
        cfg: &IsplsConfig,
        weights: &ContrastWeights,
        active: Vec<usize>,
    ) -> Self {
        let spec = cfg.penalty;
        CStepProblem {
            spec,
            outer_gamma: spec.outer_gamma(cps.len()),
            denominator: cfg.sign_denominator,
            inner_max_iter: cfg.inner_max_iter,
            inner_tol: cfg.inner_tol,
            g: cps.iter().zip(w).map(|(cp, wl)| cp.gram_apply(wl)).collect(),
            omega: cps.iter().map(|cp| 1.0 / (cp.n as f64).powi(2)).collect(),
            mu2_star: weights.mu2_star.clone(),
            active,
            p: w[0].len(),
        }
    }

    fn mu2(&self) -> f64 {
        self.spec.mu2
    }

    fn inner(&self) -> McpParams {
        McpParams { lambda: self.spec.mu1, gamma: self.spec.a }
    }

    fn row(&self, c: &[Array1<f64>], j: usize) -> Vec<f64> {
        self.active.iter().map(|&l| c[l][j]).collect()
    }

    fn curvature(&self, reference: &[f64]) -> Vec<f64> {
        match self.spec.contrast {
            Contrast::Magnitude => vec![1.0; reference.len()],
            Contrast::Sign => reference.iter().map(|r| 1.0 / (r * r + self.spec.tau2).sqrt()).collect(),
        }
    }

    fn mean_omega(&self) -> f64 {
        self.active.iter().map(|&l| self.omega[l]).sum::<f64>() / self.active.len() as f64
    }

    fn alpha(&self, reference: &[f64]) -> Vec<f64> {
        (0..reference.len())
            .map(|i| composite_weight_lla(reference, i, self.spec.mu1, self.spec.a, self.outer_gamma))
            .collect()
    }

    /// One pass over all coordinates with every linearization frozen at `c_ref`.
    pub fn sweep(&self, c_ref: &[Array1<f64>]) -> Vec<Array1<f64>> {
        let mut out: Vec<Array1<f64>> = c_ref.iter().map(|c| Array1::zeros(c.len())).collect();
        if self.active.is_empty() {
            return out;
        }
        let printed = self.denominator == SignDenominator::Printed && self.spec.contrast == Contrast::Sign;
        let omega: Vec<f64> = self.active.iter().map(|&l| self.omega[l]).collect();
        let mut buf = vec![0.0; self.active.len()];
        for j in 0..self.p {
            let reference = self.row(c_ref, j);
            let g: Vec<f64> = self.active.iter().map(|&l| self.g[l][j]).collect();
            if printed {
                self.printed_block(&g, &reference, &mut buf);
            } else {
                let k = self.curvature(&reference);
                match self.spec.model {
                    Model::Heterogeneity => {
                        let alpha = self.alpha(&reference);
                        block::hetero(&g, &omega, &alpha, &k, self.mu2(), &mut buf);
                    }
                    Model::Homogeneity => {
                        let t = mcp_slope(group_norm(&reference), &self.inner());
                        block::homo(&g, &omega, &k, self.mu2(), self.mean_omega() * t, &mut buf);
                    }
                }
            }
            for (i, &l) in self.active.iter().enumerate() {
                out[l][j] = buf[i];
            }
        }
        out
    }

    /// Literal per-dataset fixed-point map with the whole-denominator grouping.
    fn printed_block(&self, g: &[f64], start: &[f64], out: &mut [f64]) {
        let la = g.len();
        let tau2 = self.spec.tau2;
        let mstar: Vec<f64> = self.active.iter().map(|&l| self.mu2_star[l]).collect();
        let mut cur = start.to_vec();
        let mut s = vec![0.0; la];
        for _ in 0..self.inner_max_iter {
            let signs: Vec<f64> = cur.iter().map(|c| smooth_sign(*c, tau2)).collect();
            let total: f64 = signs.iter().sum();
            for l in 0..la {
                let r = (cur[l] * cur[l] + tau2).sqrt();
                s[l] = g[l] + mstar[l] / r * (total - signs[l]);
            }
            let next: Vec<f64> = match self.spec.model {
                Model::Heterogeneity => {
                    let alpha = self.alpha(&cur);
                    (0..la)
                        .map(|l| {
                            let d = (1.0 + mstar[l] * (la as f64 - 1.0)) / (cur[l] * cur[l] + tau2);
                            soft_threshold(s[l], alpha[l]) / d
                        })
                        .collect()
                }
                Model::Homogeneity => {
                    let t = mcp_slope(group_norm(&cur), &self.inner());
                    let sn = group_norm(&s);
                    (0..la)
                        .map(|l| {
                            if sn == 0.0 {
                                return 0.0;
                            }
                            let d = (1.0 + mstar[l] * (la as f64 - 1.0)) / (cur[l] * cur[l] + tau2);
                            (sn - t).max(0.0) * s[l] / (d * sn)
                        })
                        .collect()
                }
            };
            let change = next.iter().zip(&cur).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = cur.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            cur = next;
            if change <= self.inner_tol * scale {
                break;
            }
        }
        out.copy_from_slice(&cur);
    }

    /// Value of the convex surrogate minimized by [`sweep`](Self::sweep) at reference `c_ref`.
    pub fn surrogate(&self, c: &[Array1<f64>], c_ref: &[Array1<f64>]) -> f64 {
        let mut total = 0.0;
        for &l in &self.active {
            total += self.omega[l] * (0.5 * c[l].dot(&c[l]) - self.g[l].dot(&c[l]));
        }
        if self.active.is_empty() {
            return total;
        }
        let wbar = self.mean_omega();
        for j in 0..self.p {
            let reference = self.row(c_ref, j);
            let row = self.row(c, j);
            total += match self.spec.model {
                Model::Homogeneity => wbar * mcp_slope(group_norm(&reference), &self.inner()) * group_norm(&row),
                Model::Heterogeneity => {
                    let alpha = self.alpha(&reference);
                    self.active.iter().enumerate().map(|(i, &l)| self.omega[l] * alpha[i] * row[i].abs()).sum()
                }
            };
            let k = self.curvature(&reference);
            total += pairwise(&row, |i| k[i] * row[i]) * 0.5 * self.mu2();
        }
        total
    }

    /// Repeats sweeps until the relative change drops below `inner_tol` or `sweep_max` is hit.
    pub fn solve(&self, c0: &[Array1<f64>], sweep_max: usize) -> Result<(Vec<Array1<f64>>, usize)> {
        let mut c = c0.to_vec();
        for sweep in 1..=sweep_max {
            let next = self.sweep(&c);
            if next.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(IsplsError::NumericFailure(format!("c-step sweep {sweep}")));
            }
            let (delta, scale) = relative_change(&c, &next);
            c = next;
            if delta <= self.inner_tol * scale {
                return Ok((c, sweep));
            }
        }
        Ok((c, sweep_max))
    }
}

fn pairwise(row: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..row.len() {
        for m in i + 1..row.len() {
            let d = f(i) - f(m);
            s += d * d;
        }
    }
    s
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn relative_change(old: &[Array1<f64>], new: &[Array1<f64>]) -> (f64, f64) {
    let delta: f64 = old.iter().zip(new).map(|(a, b)| norm(&(b - a))).sum();
    let scale: f64 = old.iter().map(norm).sum();
    (delta, scale)
}

fn active_set(cps: &[CrossProduct]) -> Vec<usize> {
    (0..cps.len()).filter(|&l| !cps[l].is_zero()).collect()
}

/// Joint c-step for whichever model/contrast `cfg.penalty` selects.
pub fn c_step(
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c_prev: &[Array1<f64>],
    cfg: &IsplsConfig,
    weights: &ContrastWeights,
) -> Result<Vec<Array1<f64>>> {
    let problem = CStepProblem::new(cps, w, cfg, weights, active_set(cps));
    problem.solve(c_prev, cfg.sweep_max).map(|(c, _)| c)
}

fn c_step_checked(
    model: Model,
    contrast: Contrast,
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c_prev: &[Array1<f64>],
    cfg: &IsplsConfig,
    weights: &ContrastWeights,
) -> Result<Vec<Array1<f64>>> {
    if cfg.penalty.model != model || cfg.penalty.contrast != contrast {
        return Err(IsplsError::invalid(
            "penalty",
            format!("expected {model:?}/{contrast:?}, got {:?}/{:?}", cfg.penalty.model, cfg.penalty.contrast),
        ));
    }
    c_step(cps, w, c_prev, cfg, weights)
}

pub fn c_step_homo_mag(
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c_prev: &[Array1<f64>],
    cfg: &IsplsConfig,
    weights: &ContrastWeights,
) -> Result<Vec<Array1<f64>>> {
    c_step_checked(Model::Homogeneity, Contrast::Magnitude, cps, w, c_prev, cfg, weights)
}

pub fn c_step_homo_sign(
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c_prev: &[Array1<f64>],
    cfg: &IsplsConfig,
    weights: &ContrastWeights,
) -> Result<Vec<Array1<f64>>> {
    c_step_checked(Model::Homogeneity, Contrast::Sign, cps, w, c_prev, cfg, weights)
}

pub fn c_step_hetero_mag(
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c_prev: &[Array1<f64>],
    cfg: &IsplsConfig,
    weights: &ContrastWeights,
) -> Result<Vec<Array1<f64>>> {
    c_step_checked(Model::Heterogeneity, Contrast::Magnitude, cps, w, c_prev, cfg, weights)
}

pub fn c_step_hetero_sign(
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c_prev: &[Array1<f64>],
    cfg: &IsplsConfig,
    weights: &ContrastWeights,
) -> Result<Vec<Array1<f64>>> {
    c_step_checked(Model::Heterogeneity, Contrast::Sign, cps, w, c_prev, cfg, weights)
}

/// Term-by-term value of the penalized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// `sum_l f(w_l, c_l) / (2 n_l^2)` with the concavity mix `kappa`.
    pub f_part: f64,
    /// `sum_l (||c_l||^2/2 - w_l'Z_lZ_l'c_l) / n_l^2`, the c-quadratic used by the solver.
    pub fit: f64,
    /// Selection penalty, scaled by the mean of `1/n_l^2`.
    pub pen1: f64,
    pub pen2: f64,
    /// `fit + pen1 + pen2`.
    pub total: f64,
}

pub fn objective_value(
    cps: &[CrossProduct],
    w: &[Array1<f64>],
    c: &[Array1<f64>],
    spec: &PenaltySpec,
) -> ObjectiveValue {
    let active = active_set(cps);
    let kappa = spec.kappa;
    let (mut f_part, mut fit) = (0.0, 0.0);
    for &l in &active {
        let omega = 1.0 / (cps[l].n as f64).powi(2);
        let mw = cps[l].gram_apply(&w[l]);
        let diff = &c[l] - &w[l];
        let md = cps[l].gram_apply(&diff);
        f_part += 0.5 * omega * (-kappa * w[l].dot(&mw) + (1.0 - kappa) * diff.dot(&md));
        fit += omega * (0.5 * c[l].dot(&c[l]) - mw.dot(&c[l]));
    }
    let (mut pen1, mut pen2) = (0.0, 0.0);
    if !active.is_empty() {
        let wbar = active.iter().map(|&l| 1.0 / (cps[l].n as f64).powi(2)).sum::<f64>() / active.len() as f64;
        let inner = McpParams { lambda: spec.mu1, gamma: spec.a };
        let outer = McpParams::outer(spec.outer_gamma(cps.len()));
        let mu2 = spec.mu2;
        for j in 0..w[0].len() {
            let row: Vec<f64> = active.iter().map(|&l| c[l][j]).collect();
            pen1 += wbar
                * match spec.model {
                    Model::Homogeneity => mcp(group_norm(&row), &inner),
                    Model::Heterogeneity => {
                        if spec.mu1 == 0.0 {
                            0.0
                        } else {
                            mcp(row.iter().map(|x| mcp(*x, &inner)).sum(), &outer)
                        }
                    }
                };
            pen2 += 0.5
                * mu2
                * match spec.contrast {
                    Contrast::Magnitude => pairwise(&row, |i| row[i]),
                    Contrast::Sign => pairwise(&row, |i| smooth_sign(row[i], spec.tau2)),
                };
        }
    }
    ObjectiveValue { f_part, fit, pen1, pen2, total: fit + pen1 + pen2 }
}

/// Progress notifications from [`fit_ispls_observed`].
#[derive(Debug)]
pub enum FitEvent<'a> {
    WStep(&'a DirectionState),
    CStep { state: &'a DirectionState, sweeps: usize, problem: &'a CStepProblem, reference: &'a [Array1<f64>] },
}

pub fn fit_ispls(data: &MultiStudyData, cfg: &IsplsConfig) -> Result<FitResult> {
    fit_ispls_observed(data, cfg, &mut |_| {})
}

pub fn fit_ispls_observed(
    data: &MultiStudyData,
    cfg: &IsplsConfig,
    observer: &mut dyn FnMut(FitEvent<'_>),
) -> Result<FitResult> {
    cfg.validate()?;
    let cps = build_cross_products(data);
    let p = data.p();
    let weights = ContrastWeights::new(cfg.penalty.mu2, &cps);
    let active = active_set(&cps);
    if active.is_empty() {
        return Err(IsplsError::NoSignal);
    }

    let mut state = DirectionState {
        w: cps.iter().map(|cp| first_direction(cp).unwrap_or_else(|_| Array1::zeros(p))).collect(),
        c: Vec::new(),
        iteration: 0,
    };
    state.c = state.w.clone();
    let mut trace = vec![objective_value(&cps, &state.w, &state.c, &cfg.penalty).total];
    let mut converged = false;

    while state.iteration < cfg.outer_max_iter {
        state.iteration += 1;
        for &l in &active {
            if state.c[l].iter().any(|v| *v != 0.0) {
                match spls_w_step(&cps[l], &state.c[l], cfg.penalty.kappa) {
                    Ok(w) => state.w[l] = w,
                    Err(IsplsError::OrthogonalSurrogate) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        observer(FitEvent::WStep(&state));

        let problem = CStepProblem::new(&cps, &state.w, cfg, &weights, active.clone());
        let reference = state.c.clone();
        let (c_new, sweeps) = problem.solve(&state.c, cfg.sweep_max)?;
        let (delta, scale) = relative_change(&state.c, &c_new);
        state.c = c_new;
        trace.push(objective_value(&cps, &state.w, &state.c, &cfg.penalty).total);
        observer(FitEvent::CStep { state: &state, sweeps, problem: &problem, reference: &reference });
        if delta <= cfg.outer_tol * scale {
            converged = true;
            break;
        }
    }

    let mut directions = Vec::with_capacity(cps.len());
    let mut beta = Vec::with_capacity(cps.len());
    let mut q_loads = Vec::with_capacity(cps.len());
    let mut fully_penalized = Vec::with_capacity(cps.len());
    for (l, study) in data.studies().iter().enumerate() {
        let n = norm(&state.c[l]);
        let (d, model) = if n == 0.0 {
            (Array1::zeros(p), LatentModel::zero(p, data.q()))
        } else {
            let d = &state.c[l] / n;
            let m = latent_regress(study.x(), study.y(), &d)?;
            (d, m)
        };
        fully_penalized.push(n == 0.0);
        directions.push(d);
        beta.push(model.beta);
        q_loads.push(model.q_load);
    }
    Ok(FitResult {
        selected: directions.iter().map(selection_pattern).collect(),
        directions,
        beta,
        q_loads,
        surrogates: state.c,
        fully_penalized,
        objective_trace: trace,
        converged,
        iterations: state.iteration,
    })
}
