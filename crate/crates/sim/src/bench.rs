//! Replicated comparison of methods over simulated scenarios.

use ispls_core::seed::{self, Stream};
use ispls_core::{IsplsError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{run_method, Method, MethodOptions, Tuned};
use crate::metrics::{evaluate, mean_sd};
use crate::scenario::{gen_scenario, gen_test, Scenario, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// The `seed` field of each entry is replaced by a per-replicate derived seed.
    pub scenarios: Vec<ScenarioSpec>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    pub options: MethodOptions,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(IsplsError::invalid("replicates", "must be at least 1"));
        }
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return Err(IsplsError::invalid("scenarios/methods", "must not be empty"));
        }
        self.scenarios.iter().try_for_each(ScenarioSpec::validate)
    }
}

/// Seed of the data drawn for one scenario and replicate.
pub fn data_seed(root: u64, scenario_index: usize, replicate: usize) -> u64 {
    seed::derive(root, Stream::Design, &[scenario_index as u64, replicate as u64])
}

/// Seed of the fold assignments used to tune on that data.
pub fn tuning_seed(root: u64, scenario_index: usize, replicate: usize) -> u64 {
    seed::derive(root, Stream::Tuning, &[scenario_index as u64, replicate as u64])
}

/// One study of one fitted cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub scenario_index: usize,
    pub scenario: Scenario,
    pub rho: f64,
    pub n: usize,
    pub method: Method,
    pub replicate: usize,
    pub study: usize,
    pub mspe: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Mean and sample sd over replicates of the study-averaged metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario_index: usize,
    pub scenario: Scenario,
    pub rho: f64,
    pub n: usize,
    pub method: Method,
    pub replicates: usize,
    pub mspe_mean: f64,
    pub mspe_sd: f64,
    pub sensitivity_mean: f64,
    pub sensitivity_sd: f64,
    pub specificity_mean: f64,
    pub specificity_sd: f64,
}

/// Estimated direction entries of the first replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingRow {
    pub scenario_index: usize,
    pub method: Method,
    pub study: usize,
    pub variable: usize,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub scenario_index: usize,
    pub replicate: usize,
    pub method: Method,
    pub tuned: Option<Tuned>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub records: Vec<RecordRow>,
    pub summary: Vec<SummaryRow>,
    pub loadings: Vec<LoadingRow>,
    pub cells: Vec<CellInfo>,
}

impl BenchmarkReport {
    /// Study-averaged MSPE per replicate, in replicate order; failed cells are skipped.
    pub fn replicate_mspe(&self, scenario_index: usize, method: Method) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in self.records.iter().filter(|r| r.scenario_index == scenario_index && r.method == method) {
            match out.last_mut() {
                Some(last) if last.0 == r.replicate => {
                    last.1 += r.mspe;
                    last.2 += 1;
                }
                _ => out.push((r.replicate, r.mspe, 1)),
            }
        }
        out.into_iter().map(|(rep, s, k)| (rep, s / k as f64)).collect()
    }

    pub fn summary_for(&self, scenario_index: usize, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.scenario_index == scenario_index && s.method == method)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellInfo> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

struct CellOutcome {
    info: CellInfo,
    records: Vec<RecordRow>,
    loadings: Vec<LoadingRow>,
}

fn run_cell(cfg: &BenchmarkConfig, si: usize, rep: usize) -> Vec<CellOutcome> {
    let spec = ScenarioSpec { seed: data_seed(cfg.seed, si, rep), ..cfg.scenarios[si] };
    let info = |method, tuned, converged, error| CellInfo {
        scenario_index: si,
        replicate: rep,
        method,
        tuned,
        converged,
        error,
    };
    let drawn = gen_scenario(&spec).and_then(|(train, truth)| Ok((gen_test(&spec, &truth)?, train, truth)));
    let (test, train, truth) = match drawn {
        Ok(d) => d,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&m| CellOutcome {
                    info: info(m, None, false, Some(e.to_string())),
                    records: vec![],
                    loadings: vec![],
                })
                .collect()
        }
    };
    let opts = MethodOptions { seed: tuning_seed(cfg.seed, si, rep), ..cfg.options.clone() };
    cfg.methods
        .par_iter()
        .map(|&method| match run_method(method, &train, &opts) {
            Err(e) => {
                CellOutcome { info: info(method, None, false, Some(e.to_string())), records: vec![], loadings: vec![] }
            }
            Ok(fit) => {
                let eval = evaluate(&fit.selected, &fit.beta, &truth, &test);
                let records = eval
                    .per_study
                    .iter()
                    .enumerate()
                    .map(|(study, m)| RecordRow {
                        scenario_index: si,
                        scenario: spec.scenario,
                        rho: spec.rho,
                        n: spec.n,
                        method,
                        replicate: rep,
                        study,
                        mspe: m.mspe,
                        sensitivity: m.sensitivity,
                        specificity: m.specificity,
                    })
                    .collect();
                let loadings = if rep == 0 {
                    fit.directions
                        .iter()
                        .enumerate()
                        .flat_map(|(study, d)| {
                            d.iter().enumerate().map(move |(variable, &loading)| LoadingRow {
                                scenario_index: si,
                                method,
                                study,
                                variable,
                                loading,
                            })
                        })
                        .collect()
                } else {
                    vec![]
                };
                CellOutcome { info: info(method, Some(fit.tuned), fit.converged, None), records, loadings }
            }
        })
        .collect()
}

/// Runs every method on every replicate of every scenario. Individual failures are
/// recorded in [`BenchmarkReport::cells`] and do not stop the run.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let items: Vec<(usize, usize)> =
        (0..cfg.scenarios.len()).flat_map(|si| (0..cfg.replicates).map(move |rep| (si, rep))).collect();
    let outcomes: Vec<Vec<CellOutcome>> = items.par_iter().map(|&(si, rep)| run_cell(cfg, si, rep)).collect();

    // Order: scenario, method, replicate, study.
    let mut flat: Vec<CellOutcome> = outcomes.into_iter().flatten().collect();
    let method_rank = |m: Method| cfg.methods.iter().position(|x| *x == m).unwrap_or(usize::MAX);
    flat.sort_by_key(|c| (c.info.scenario_index, method_rank(c.info.method), c.info.replicate));

    let mut report = BenchmarkReport { records: vec![], summary: vec![], loadings: vec![], cells: vec![] };
    for c in flat {
        report.records.extend(c.records);
        report.loadings.extend(c.loadings);
        report.cells.push(c.info);
    }
    for (si, spec) in cfg.scenarios.iter().enumerate() {
        for &method in &cfg.methods {
            let per_rep: Vec<[f64; 3]> = {
                let mut acc: Vec<(usize, [f64; 3], usize)> = Vec::new();
                for r in report.records.iter().filter(|r| r.scenario_index == si && r.method == method) {
                    let v = [r.mspe, r.sensitivity, r.specificity];
                    match acc.last_mut() {
                        Some(last) if last.0 == r.replicate => {
                            (0..3).for_each(|k| last.1[k] += v[k]);
                            last.2 += 1;
                        }
                        _ => acc.push((r.replicate, v, 1)),
                    }
                }
                acc.into_iter().map(|(_, s, k)| s.map(|x| x / k as f64)).collect()
            };
            let stat = |k: usize| mean_sd(&per_rep.iter().map(|v| v[k]).collect::<Vec<_>>());
            let (mspe_mean, mspe_sd) = stat(0);
            let (sensitivity_mean, sensitivity_sd) = stat(1);
            let (specificity_mean, specificity_sd) = stat(2);
            report.summary.push(SummaryRow {
                scenario_index: si,
                scenario: spec.scenario,
                rho: spec.rho,
                n: spec.n,
                method,
                replicates: per_rep.len(),
                mspe_mean,
                mspe_sd,
                sensitivity_mean,
                sensitivity_sd,
                specificity_mean,
                specificity_sd,
            });
        }
    }
    Ok(report)
}
