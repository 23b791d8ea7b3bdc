//! Simulated multi-study designs with AR(1)-correlated predictors and rank-one coefficients.

use std::fmt;

use ispls_core::seed::{self, Stream};
use ispls_core::{IsplsError, MultiStudyData, Result, StudyData};
use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Overlap structure of the signal variables across studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Shared support, shared magnitudes.
    S1,
    /// Shared support, magnitudes drawn per study.
    S2,
    /// Half the support shared, the rest study-specific and disjoint.
    S3,
    /// Supports drawn independently per study.
    S4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "S1" | "1" => Ok(Scenario::S1),
            "S2" | "2" => Ok(Scenario::S2),
            "S3" | "3" => Ok(Scenario::S3),
            "S4" | "4" => Ok(Scenario::S4),
            _ => Err(format!("unknown scenario `{s}` (expected S1..S4)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n_studies: usize,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub rho: f64,
    pub n_signal: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Magnitude range of the nonzero first-column coefficients.
pub const MAGNITUDE_RANGE: (f64, f64) = (0.5, 4.0);
/// Ratio between successive coefficient columns.
pub const COLUMN_GROWTH: f64 = 1.2;

impl ScenarioSpec {
    /// Four studies, 100 predictors, five responses, ten signals per study, unit noise.
    pub fn standard(scenario: Scenario, rho: f64, n: usize, seed: u64) -> Self {
        ScenarioSpec { scenario, n_studies: 4, p: 100, q: 5, n, rho, n_signal: 10, noise_sd: 1.0, seed }
    }

    fn shared_count(&self) -> usize {
        self.n_signal / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, detail: String| Err(IsplsError::invalid(name, detail));
        if self.n_studies < 2 {
            return bad("n_studies", format!("must be at least 2, got {}", self.n_studies));
        }
        if self.p == 0 || self.q == 0 || self.n_signal == 0 {
            return bad("p/q/n_signal", "must be positive".into());
        }
        if self.n < 2 {
            return bad("n", format!("must be at least 2, got {}", self.n));
        }
        if self.n_signal > self.p {
            return bad("n_signal", format!("{} exceeds p = {}", self.n_signal, self.p));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho", format!("must lie in [0, 1), got {}", self.rho));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd", format!("must be positive, got {}", self.noise_sd));
        }
        if self.scenario == Scenario::S3 {
            let shared = self.shared_count();
            let need = shared + (self.n_signal - shared) * self.n_studies;
            if self.p < need {
                return bad("p", format!("S3 with {} studies needs p >= {need}, got {}", self.n_studies, self.p));
            }
        }
        Ok(())
    }
}

/// First coefficient column and support of every study.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `n_studies x p`.
    pub beta1: Array2<f64>,
    pub support: Vec<Vec<bool>>,
}

impl GroundTruth {
    /// `p x q` coefficients of study `l`, column `i` equal to `1.2^i * beta1`.
    pub fn beta(&self, l: usize, q: usize) -> Array2<f64> {
        let b = self.beta1.row(l);
        Array2::from_shape_fn((b.len(), q), |(j, i)| COLUMN_GROWTH.powi(i as i32) * b[j])
    }
}

/// Lower-triangular `F` with `F F' = [rho^|j-k|]`.
pub fn ar1_factor(p: usize, rho: f64) -> Array2<f64> {
    let s = (1.0 - rho * rho).sqrt();
    Array2::from_shape_fn((p, p), |(j, k)| {
        if k > j {
            0.0
        } else if k == 0 {
            rho.powi(j as i32)
        } else {
            rho.powi((j - k) as i32) * s
        }
    })
}

/// `n` rows with unit-variance AR(1) columns, generated by the Markov recursion.
fn ar1_rows(rng: &mut impl Rng, n: usize, p: usize, rho: f64) -> Array2<f64> {
    let s = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[[i, 0]] = prev;
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + s * z;
            x[[i, j]] = prev;
        }
    }
    x
}

/// `k` positions spread evenly over `0..p`.
fn spaced(k: usize, p: usize) -> Vec<usize> {
    (0..k).map(|i| i * p / k).collect()
}

fn supports(spec: &ScenarioSpec) -> Vec<Vec<usize>> {
    let (l, p, k) = (spec.n_studies, spec.p, spec.n_signal);
    match spec.scenario {
        Scenario::S1 | Scenario::S2 => vec![spaced(k, p); l],
        Scenario::S3 => {
            let shared = spaced(spec.shared_count(), p);
            let specific = k - shared.len();
            let mut rest: Vec<usize> = (0..p).filter(|j| !shared.contains(j)).collect();
            rest.shuffle(&mut seed::rng(spec.seed, Stream::Support, &[0]));
            (0..l)
                .map(|i| {
                    let mut s = shared.clone();
                    s.extend_from_slice(&rest[i * specific..(i + 1) * specific]);
                    s.sort_unstable();
                    s
                })
                .collect()
        }
        Scenario::S4 => (0..l)
            .map(|i| {
                let mut s = index::sample(&mut seed::rng(spec.seed, Stream::Support, &[i as u64 + 1]), p, k).into_vec();
                s.sort_unstable();
                s
            })
            .collect(),
    }
}

pub fn gen_truth(spec: &ScenarioSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let (l, p) = (spec.n_studies, spec.p);
    let (lo, hi) = MAGNITUDE_RANGE;
    let mut sign_rng = seed::rng(spec.seed, Stream::Coefficients, &[u64::MAX]);
    let signs: Vec<f64> = (0..p).map(|_| if sign_rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut shared_rng = seed::rng(spec.seed, Stream::Coefficients, &[u64::MAX - 1]);
    let shared: Vec<f64> = (0..p).map(|_| shared_rng.random_range(lo..=hi)).collect();

    let mut beta1 = Array2::zeros((l, p));
    let mut support = vec![vec![false; p]; l];
    for (i, positions) in supports(spec).into_iter().enumerate() {
        let mut rng = seed::rng(spec.seed, Stream::Coefficients, &[i as u64]);
        for j in positions {
            let magnitude = match spec.scenario {
                Scenario::S1 => shared[j],
                _ => rng.random_range(lo..=hi),
            };
            beta1[[i, j]] = signs[j] * magnitude;
            support[i][j] = true;
        }
    }
    Ok(GroundTruth { beta1, support })
}

fn draw_studies(spec: &ScenarioSpec, truth: &GroundTruth, design: Stream, noise: Stream) -> Result<MultiStudyData> {
    let studies = (0..spec.n_studies)
        .map(|i| {
            let x = ar1_rows(&mut seed::rng(spec.seed, design, &[i as u64]), spec.n, spec.p, spec.rho);
            let mut nrng = seed::rng(spec.seed, noise, &[i as u64]);
            let eps =
                Array2::from_shape_fn((spec.n, spec.q), |_| spec.noise_sd * nrng.sample::<f64, _>(StandardNormal));
            let y = x.dot(&truth.beta(i, spec.q)) + eps;
            StudyData::new(format!("study{}", i + 1), x, y)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiStudyData::new(studies)
}

/// Training data and the truth it was generated from.
pub fn gen_scenario(spec: &ScenarioSpec) -> Result<(MultiStudyData, GroundTruth)> {
    let truth = gen_truth(spec)?;
    let data = draw_studies(spec, &truth, Stream::Design, Stream::Noise)?;
    Ok((data, truth))
}

/// An independent draw of the same size from the same truth.
pub fn gen_test(spec: &ScenarioSpec, truth: &GroundTruth) -> Result<MultiStudyData> {
    spec.validate()?;
    draw_studies(spec, truth, Stream::TestDesign, Stream::TestNoise)
}

/// Indices of the nonzero entries of a support row.
pub fn support_positions(row: &[bool]) -> Vec<usize> {
    row.iter().enumerate().filter(|(_, s)| **s).map(|(j, _)| j).collect()
}

#[cfg(test)]
fn column_mean_var(col: ndarray::ArrayView1<f64>) -> (f64, f64) {
    let n = col.len() as f64;
    let m = col.sum() / n;
    let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[cfg(test)]
fn correlation(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let (ma, va) = column_mean_var(a);
    let (mb, vb) = column_mean_var(b);
    let n = a.len() as f64;
    let cov = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ar1_factor_examples() {
        assert_eq!(ar1_factor(5, 0.0), Array2::eye(5));
        let f = ar1_factor(2, 0.7);
        let s = f.dot(&f.t());
        for (got, want) in s.iter().zip([1.0, 0.7, 0.7, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let f = ar1_factor(100, 0.7);
        let s = f.dot(&f.t());
        for ((j, k), v) in s.indexed_iter() {
            let want = 0.7f64.powi((j as i32 - k as i32).abs());
            assert!((v - want).abs() < 1e-10, "({j},{k})");
        }
    }

    #[test]
    fn generator_moments() {
        let mut rng = seed::rng(1, Stream::Design, &[0]);
        let x = ar1_rows(&mut rng, 10_000, 6, 0.7);
        for j in 0..6 {
            let (m, v) = column_mean_var(x.column(j));
            assert!(m.abs() < 0.05 && (0.9..1.1).contains(&v), "column {j}: {m} {v}");
        }
        for j in 0..5 {
            assert!((correlation(x.column(j), x.column(j + 1)) - 0.7).abs() < 0.05);
        }
    }

    #[test]
    fn uncorrelated_design_has_small_sample_correlations() {
        let spec = ScenarioSpec { n: 120, ..ScenarioSpec::standard(Scenario::S1, 0.0, 120, 4) };
        let (data, _) = gen_scenario(&spec).unwrap();
        let x = data.studies()[0].x();
        let bound = 4.0 / (120f64).sqrt();
        let (mut ok, mut total) = (0, 0);
        for j in 0..spec.p {
            for k in j + 1..spec.p {
                total += 1;
                if correlation(x.column(j), x.column(k)).abs() < bound {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 >= 0.95 * total as f64);
    }

    #[test]
    fn support_laws() {
        for scenario in Scenario::ALL {
            for s in 0..5 {
                let spec = ScenarioSpec::standard(scenario, 0.2, 40, s);
                let truth = gen_truth(&spec).unwrap();
                for (i, row) in truth.support.iter().enumerate() {
                    assert_eq!(row.iter().filter(|x| **x).count(), 10);
                    for (j, on) in row.iter().enumerate() {
                        let b = truth.beta1[[i, j]].abs();
                        if *on {
                            assert!((0.5..=4.0).contains(&b));
                        } else {
                            assert_eq!(b, 0.0);
                        }
                    }
                }
                let sets: Vec<HashSet<usize>> =
                    truth.support.iter().map(|r| support_positions(r).into_iter().collect()).collect();
                match scenario {
                    Scenario::S1 | Scenario::S2 => assert!(sets.iter().all(|s| *s == sets[0])),
                    Scenario::S3 => {
                        let shared: HashSet<usize> = spaced(5, 100).into_iter().collect();
                        for a in 0..4 {
                            for b in a + 1..4 {
                                assert_eq!(sets[a].intersection(&sets[b]).copied().collect::<HashSet<_>>(), shared);
                            }
                        }
                    }
                    Scenario::S4 => {}
                }
                if scenario == Scenario::S1 {
                    for l in 1..4 {
                        assert_eq!(truth.beta1.row(l), truth.beta1.row(0));
                    }
                }
                if scenario == Scenario::S2 {
                    assert_ne!(truth.beta1.row(1), truth.beta1.row(0));
                }
            }
        }
    }

    #[test]
    fn deterministic_and_infeasible_s3() {
        let spec = ScenarioSpec::standard(Scenario::S4, 0.7, 40, 7);
        let a = gen_scenario(&spec).unwrap();
        let b = gen_scenario(&spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let test = gen_test(&spec, &a.1).unwrap();
        assert_ne!(test.studies()[0].x(), a.0.studies()[0].x());

        let bad = ScenarioSpec { p: 20, ..ScenarioSpec::standard(Scenario::S3, 0.2, 40, 1) };
        assert!(gen_scenario(&bad).is_err());
        let ok = ScenarioSpec { p: 30, ..bad };
        assert!(gen_scenario(&ok).is_ok());
    }

    #[test]
    fn coefficient_columns_grow_geometrically() {
        let truth = gen_truth(&ScenarioSpec::standard(Scenario::S2, 0.2, 40, 3)).unwrap();
        let b = truth.beta(1, 5);
        for j in 0..100 {
            for i in 1..5 {
                assert!((b[[j, i]] - 1.2 * b[[j, i - 1]]).abs() < 1e-12);
            }
        }
    }
}
