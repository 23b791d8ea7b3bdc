//! Simulation scenarios, baseline methods, evaluation metrics and replicated benchmarks.

pub mod bench;
pub mod methods;
pub mod metrics;
pub mod ooi;
pub mod scenario;

pub use bench::{run_benchmark, BenchmarkConfig, BenchmarkReport, LoadingRow, RecordRow, SummaryRow};
pub use methods::{
    fit_method, run_method, tune_method, MetaCombination, Method, MethodFit, MethodOptions, Prediction, Tuned,
};
pub use metrics::{evaluate, mean_sd, Evaluation, StudyMetrics};
pub use ooi::{ooi_study, OoiConfig, OoiReport, OoiRow, OoiSummary};
pub use scenario::{ar1_factor, gen_scenario, gen_test, gen_truth, GroundTruth, Scenario, ScenarioSpec};
