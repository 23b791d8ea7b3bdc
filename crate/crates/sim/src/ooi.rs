//! Selection stability under repeated training/testing splits.

use ispls_core::seed::{self, Stream};
use ispls_core::{IsplsError, MultiStudyData, Result};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{fit_method, tune_method, Method, MethodOptions, Tuned};
use crate::metrics::{mean_sd, mspe};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OoiConfig {
    pub methods: Vec<Method>,
    pub resamples: usize,
    /// Training fraction of every study.
    pub split: f64,
    pub seed: u64,
    pub options: MethodOptions,
}

impl OoiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(IsplsError::invalid("resamples", "must be at least 1"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(IsplsError::invalid("split", format!("must lie in (0, 1), got {}", self.split)));
        }
        if self.methods.is_empty() {
            return Err(IsplsError::invalid("methods", "must not be empty"));
        }
        Ok(())
    }
}

/// Fraction of resamples in which a variable was selected in at least one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OoiRow {
    pub method: Method,
    pub variable: usize,
    pub ooi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OoiSummary {
    pub method: Method,
    /// Number of variables selected in at least one resample.
    pub identified: usize,
    /// Median OOI over the identified variables.
    pub median_ooi: f64,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OoiReport {
    pub rows: Vec<OoiRow>,
    pub summary: Vec<OoiSummary>,
    pub tuned: Vec<(Method, Tuned)>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// `(train, test)` for resample `r`; at least two rows on each side.
fn split_rows(data: &MultiStudyData, split: f64, root: u64, r: usize) -> Result<(MultiStudyData, MultiStudyData)> {
    let mut train = Vec::with_capacity(data.len());
    let mut test = Vec::with_capacity(data.len());
    for (l, s) in data.studies().iter().enumerate() {
        let n = s.n();
        if n < 4 {
            return Err(IsplsError::TooFewRows { study: s.id().to_string(), rows: n, min: 4 });
        }
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut seed::rng(root, Stream::Resample, &[r as u64, l as u64]));
        let k = ((split * n as f64).round() as usize).clamp(2, n - 2);
        let (a, b) = rows.split_at(k);
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_unstable();
        b.sort_unstable();
        train.push(s.subset(&a)?);
        test.push(s.subset(&b)?);
    }
    Ok((MultiStudyData::new(train)?, MultiStudyData::new(test)?))
}

/// Tunes each method once on the full data, then refits it on every resample.
pub fn ooi_study(data: &MultiStudyData, cfg: &OoiConfig) -> Result<OoiReport> {
    cfg.validate()?;
    let p = data.p();
    let splits: Vec<(MultiStudyData, MultiStudyData)> =
        (0..cfg.resamples).map(|r| split_rows(data, cfg.split, cfg.seed, r)).collect::<Result<_>>()?;
    let opts = MethodOptions { seed: seed::derive(cfg.seed, Stream::Tuning, &[]), ..cfg.options.clone() };

    let mut report = OoiReport { rows: vec![], summary: vec![], tuned: vec![] };
    for &method in &cfg.methods {
        let tuned = tune_method(method, data, &opts)?;
        let per_resample: Vec<(Vec<bool>, f64)> = splits
            .par_iter()
            .map(|(train, test)| {
                let fit = fit_method(method, train, &tuned, &opts)?;
                let any: Vec<bool> = (0..p).map(|j| fit.selected.iter().any(|s| s[j])).collect();
                let (mut sse, mut count) = (0.0, 0.0);
                for (s, b) in test.studies().iter().zip(&fit.beta) {
                    let entries = (s.n() * s.q()) as f64;
                    sse += mspe(s.x(), s.y(), b) * entries;
                    count += entries;
                }
                Ok((any, (sse / count).sqrt()))
            })
            .collect::<Result<_>>()?;

        let k = cfg.resamples as f64;
        let oois: Vec<f64> = (0..p).map(|j| per_resample.iter().filter(|(sel, _)| sel[j]).count() as f64 / k).collect();
        let mut hit: Vec<f64> = oois.iter().copied().filter(|o| *o > 0.0).collect();
        let rmse: Vec<f64> = per_resample.iter().map(|r| r.1).collect();
        let (rmse_mean, rmse_sd) = mean_sd(&rmse);
        report.summary.push(OoiSummary {
            method,
            identified: hit.len(),
            median_ooi: median(&mut hit),
            rmse_mean,
            rmse_sd,
        });
        report.rows.extend(oois.into_iter().enumerate().map(|(variable, ooi)| OoiRow { method, variable, ooi }));
        report.tuned.push((method, tuned));
    }
    Ok(report)
}
