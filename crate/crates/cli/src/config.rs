//! Fully resolved run configurations. A run manifest stores one of these and is
//! enough to repeat the run.

use std::path::PathBuf;

use ispls_core::{IsplsConfig, TuningGrid};
use ispls_sim::{BenchmarkConfig, OoiConfig, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRun {
    pub manifest: PathBuf,
    pub standardize: bool,
    pub solver: IsplsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvRun {
    pub manifest: PathBuf,
    pub standardize: bool,
    /// `mu1` and `mu2` of the penalty are ignored; the grid supplies them.
    pub solver: IsplsConfig,
    pub grid: TuningGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRun {
    pub spec: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OoiRun {
    pub manifest: PathBuf,
    pub standardize: bool,
    pub ooi: OoiConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RunConfig {
    Fit(FitRun),
    Cv(CvRun),
    Simulate(SimulateRun),
    Benchmark(BenchmarkConfig),
    Ooi(OoiRun),
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            RunConfig::Fit(f) => f.solver.validate()?,
            RunConfig::Cv(c) => {
                c.solver.validate()?;
                c.grid.validate()?;
            }
            RunConfig::Simulate(s) => s.spec.validate()?,
            RunConfig::Benchmark(b) => b.validate()?,
            RunConfig::Ooi(o) => o.ooi.validate()?,
        }
        Ok(())
    }

    pub fn command(&self) -> &'static str {
        match self {
            RunConfig::Fit(_) => "fit",
            RunConfig::Cv(_) => "cv",
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Benchmark(_) => "benchmark",
            RunConfig::Ooi(_) => "ooi",
        }
    }
}

/// Written as `run.json` next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    #[serde(default)]
    pub result: serde_json::Value,
}

/// Accepts either a bare [`RunConfig`] or a [`RunManifest`].
pub fn parse_run(text: &str, origin: &str) -> CliResult<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::data(origin, e.to_string()))?;
    let config = if value.get("config").is_some() {
        serde_json::from_value::<RunManifest>(value).map(|m| m.config)
    } else {
        serde_json::from_value::<RunConfig>(value)
    }
    .map_err(|e| CliError::data(origin, e.to_string()))?;
    config.validate()?;
    Ok(config)
}
