//! Selection accuracy and prediction error against a known truth.

use ispls_core::MultiStudyData;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::scenario::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyMetrics {
    pub mspe: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_study: Vec<StudyMetrics>,
    pub average: StudyMetrics,
}

/// `(sensitivity, specificity)`; a class with no members scores 1.
pub fn selection_rates(selected: &[bool], support: &[bool]) -> (f64, f64) {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &t) in selected.iter().zip(support) {
        if t {
            pos += 1;
            tp += s as usize;
        } else {
            neg += 1;
            tn += !s as usize;
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    (rate(tp, pos), rate(tn, neg))
}

/// `||Y - X beta||_F^2 / (n q)`.
pub fn mspe(x: &Array2<f64>, y: &Array2<f64>, beta: &Array2<f64>) -> f64 {
    let r = y - &x.dot(beta);
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

pub fn evaluate(
    selected: &[Vec<bool>],
    beta: &[Array2<f64>],
    truth: &GroundTruth,
    test: &MultiStudyData,
) -> Evaluation {
    let per_study: Vec<StudyMetrics> = test
        .studies()
        .iter()
        .enumerate()
        .map(|(l, s)| {
            let (sensitivity, specificity) = selection_rates(&selected[l], &truth.support[l]);
            StudyMetrics { mspe: mspe(s.x(), s.y(), &beta[l]), sensitivity, specificity }
        })
        .collect();
    let k = per_study.len() as f64;
    let avg = |f: fn(&StudyMetrics) -> f64| per_study.iter().map(f).sum::<f64>() / k;
    let average = StudyMetrics {
        mspe: avg(|m| m.mspe),
        sensitivity: avg(|m| m.sensitivity),
        specificity: avg(|m| m.specificity),
    };
    Evaluation { per_study, average }
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{gen_scenario, gen_test, Scenario, ScenarioSpec};
    use ispls_core::StudyData;
    use proptest::prelude::*;

    #[test]
    fn exact_support_scores_one() {
        let truth = [true, false, true, false];
        assert_eq!(selection_rates(&truth, &truth), (1.0, 1.0));
        assert_eq!(selection_rates(&[true; 4], &truth), (1.0, 0.0));
        assert_eq!(selection_rates(&[false; 4], &truth), (0.0, 1.0));
        assert_eq!(selection_rates(&[true, true, false, false], &truth), (0.5, 0.5));
    }

    #[test]
    fn true_coefficients_give_noise_variance() {
        let spec = ScenarioSpec::standard(Scenario::S2, 0.2, 500, 11);
        let (_, truth) = gen_scenario(&spec).unwrap();
        let test = gen_test(&spec, &truth).unwrap();
        let betas: Vec<_> = (0..4).map(|l| truth.beta(l, spec.q)).collect();
        let eval = evaluate(&truth.support, &betas, &truth, &test);
        for m in &eval.per_study {
            assert!((0.7..1.3).contains(&m.mspe), "{}", m.mspe);
            assert_eq!((m.sensitivity, m.specificity), (1.0, 1.0));
        }
    }

    #[test]
    fn mean_sd_examples() {
        assert_eq!(mean_sd(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn permuting_variables_leaves_metrics_unchanged(seed in 0u64..1000, shift in 1usize..19) {
            let spec = ScenarioSpec { p: 20, n_signal: 5, n_studies: 2, q: 2, ..ScenarioSpec::standard(Scenario::S4, 0.5, 15, seed) };
            let (_, truth) = gen_scenario(&spec).unwrap();
            let test = gen_test(&spec, &truth).unwrap();
            let selected: Vec<Vec<bool>> = (0..2).map(|l| (0..20).map(|j| (j * 7 + l + seed as usize) % 3 == 0).collect()).collect();
            let beta: Vec<Array2<f64>> = (0..2).map(|l| Array2::from_shape_fn((20, 2), |(j, i)| ((j + i + l) as f64).sin())).collect();
            let base = evaluate(&selected, &beta, &truth, &test);

            let perm: Vec<usize> = (0..20).map(|j| (j + shift) % 20).collect();
            let truth_p = GroundTruth {
                beta1: truth.beta1.select(ndarray::Axis(1), &perm),
                support: truth.support.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect(),
            };
            let test_p = MultiStudyData::new(test.studies().iter().map(|s| {
                StudyData::new(s.id(), s.x().select(ndarray::Axis(1), &perm), s.y().clone()).unwrap()
            }).collect()).unwrap();
            let sel_p: Vec<Vec<bool>> = selected.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
            let beta_p: Vec<Array2<f64>> = beta.iter().map(|b| b.select(ndarray::Axis(0), &perm)).collect();
            let moved = evaluate(&sel_p, &beta_p, &truth_p, &test_p);
            for (a, b) in base.per_study.iter().zip(&moved.per_study) {
                prop_assert_eq!(a.sensitivity, b.sensitivity);
                prop_assert_eq!(a.specificity, b.specificity);
                prop_assert!((a.mspe - b.mspe).abs() <= 1e-12 * a.mspe.max(1.0));
            }
        }
    }
}
