use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ispls_cli::commands::{execute, replay, resolve_grid};
use ispls_cli::config::{CvRun, FitRun, OoiRun, RunConfig, SimulateRun};
use ispls_cli::error::{CliError, CliResult};
use ispls_core::{Contrast, IsplsConfig, Model, PenaltySpec, TuningGrid};
use ispls_sim::{BenchmarkConfig, Method, MethodOptions, OoiConfig, Scenario, ScenarioSpec};

#[derive(Parser)]
#[command(name = "ispls", version, about = "Integrative sparse PLS across multiple datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at fixed (mu1, mu2).
    Fit {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        penalty: PenaltyArgs,
        #[arg(long, default_value_t = 0.0)]
        mu1: f64,
        #[arg(long, default_value_t = 0.0)]
        mu2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate over a (mu1, mu2) grid, then fit at the best point.
    Cv {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        penalty: PenaltyArgs,
        /// Comma-separated, ascending; defaults to the data-scaled log grid.
        #[arg(long, value_delimiter = ',')]
        mu1_values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_values_t = TuningGrid::DEFAULT_MU2)]
        mu2_values: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw one simulated multi-study dataset.
    Simulate {
        #[arg(long)]
        scenario: Scenario,
        #[command(flatten)]
        design: Design,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicated comparison of all methods on simulated data.
    Benchmark {
        /// Comma-separated scenarios.
        #[arg(long, value_delimiter = ',', default_value = "S1")]
        scenario: Vec<Scenario>,
        #[command(flatten)]
        design: Design,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "meta_pls,meta_spls,pooled_spls,ispls_homo_m,ispls_homo_s,ispls_hetero_m,ispls_hetero_s"
        )]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 50)]
        replicates: usize,
        #[command(flatten)]
        tuning: MethodArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Selection stability over random subsamples.
    Ooi {
        #[command(flatten)]
        input: Input,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "meta_spls,pooled_spls,ispls_homo_m,ispls_homo_s,ispls_hetero_m,ispls_hetero_s"
        )]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 100)]
        resamples: usize,
        /// Training fraction of each resample.
        #[arg(long, default_value_t = 0.75)]
        split: f64,
        #[command(flatten)]
        tuning: MethodArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the configuration recorded in a run.json.
    Replay {
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// JSON manifest listing each study's X and Y CSV files.
    #[arg(long)]
    manifest: PathBuf,
    /// Use the columns as given instead of centering and scaling per study.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Homo,
    Hetero,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContrastArg {
    Mag,
    Sign,
}

#[derive(Args)]
struct PenaltyArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, value_enum)]
    contrast: ContrastArg,
    #[arg(long, default_value_t = PenaltySpec::DEFAULT_A)]
    a: f64,
    /// Outer concavity of the composite penalty; follows mu1 when omitted.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = PenaltySpec::DEFAULT_TAU2)]
    tau2: f64,
    #[arg(long, default_value_t = PenaltySpec::DEFAULT_KAPPA)]
    kappa: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct Design {
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    /// Observations per study.
    #[arg(long, default_value_t = 120)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    studies: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    q: usize,
    #[arg(long, default_value_t = 10)]
    signals: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = PenaltySpec::DEFAULT_KAPPA)]
    kappa: f64,
    #[arg(long, value_delimiter = ',')]
    mu1_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mu2_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
}

impl PenaltyArgs {
    fn solver(&self, mu1: f64, mu2: f64) -> IsplsConfig {
        let model = match self.model {
            ModelArg::Homo => Model::Homogeneity,
            ModelArg::Hetero => Model::Heterogeneity,
        };
        let contrast = match self.contrast {
            ContrastArg::Mag => Contrast::Magnitude,
            ContrastArg::Sign => Contrast::Sign,
        };
        let penalty = PenaltySpec {
            a: self.a,
            b: self.b,
            tau2: self.tau2,
            kappa: self.kappa,
            ..PenaltySpec::new(model, contrast)
        }
        .with_mu(mu1, mu2);
        IsplsConfig { outer_max_iter: self.max_iter, outer_tol: self.tol, ..IsplsConfig::new(penalty) }
    }
}

impl Design {
    fn spec(&self, scenario: Scenario, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            scenario,
            n_studies: self.studies,
            p: self.p,
            q: self.q,
            n: self.n,
            rho: self.rho,
            n_signal: self.signals,
            noise_sd: self.noise_sd,
            seed,
        }
    }
}

impl MethodArgs {
    fn options(&self, seed: u64) -> MethodOptions {
        let d = MethodOptions::default();
        MethodOptions {
            folds: self.folds,
            seed,
            kappa: self.kappa,
            mu1_values: self.mu1_values.clone(),
            mu2_values: self.mu2_values.clone().unwrap_or(d.mu2_values.clone()),
            etas: self.etas.clone().unwrap_or(d.etas.clone()),
            ..d
        }
    }
}

/// Stored paths are absolute so a run manifest replays from any directory.
fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path.display(), e))
}

fn configure(command: Command) -> CliResult<(RunConfig, PathBuf)> {
    Ok(match command {
        Command::Fit { input, penalty, mu1, mu2, out } => {
            let run = FitRun {
                manifest: absolute(&input.manifest)?,
                standardize: !input.no_standardize,
                solver: penalty.solver(mu1, mu2),
            };
            (RunConfig::Fit(run), out)
        }
        Command::Cv { input, penalty, mu1_values, mu2_values, folds, seed, out } => {
            let manifest = absolute(&input.manifest)?;
            let standardize = !input.no_standardize;
            let grid = match mu1_values {
                Some(mu1_values) => TuningGrid { mu1_values, mu2_values, folds, seed },
                None => TuningGrid { mu2_values, ..resolve_grid(&manifest, standardize, folds, seed)? },
            };
            (RunConfig::Cv(CvRun { manifest, standardize, solver: penalty.solver(0.0, 0.0), grid }), out)
        }
        Command::Simulate { scenario, design, seed, out } => {
            (RunConfig::Simulate(SimulateRun { spec: design.spec(scenario, seed) }), out)
        }
        Command::Benchmark { scenario, design, methods, replicates, tuning, seed, out } => {
            let cfg = BenchmarkConfig {
                scenarios: scenario.into_iter().map(|s| design.spec(s, seed)).collect(),
                methods,
                replicates,
                seed,
                options: tuning.options(seed),
            };
            (RunConfig::Benchmark(cfg), out)
        }
        Command::Ooi { input, methods, resamples, split, tuning, seed, out } => {
            let ooi = OoiConfig { methods, resamples, split, seed, options: tuning.options(seed) };
            let run = OoiRun { manifest: absolute(&input.manifest)?, standardize: !input.no_standardize, ooi };
            (RunConfig::Ooi(run), out)
        }
        Command::Replay { .. } => unreachable!("handled before configuration"),
    })
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("ISPLS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Usage(format!("ISPLS_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("ISPLS_THREADS: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let result = match cli.command {
        Command::Replay { run, out } => replay(&run, &out)?,
        other => {
            let (config, out) = configure(other)?;
            execute(&config, &out)?
        }
    };
    if result.get("converged") == Some(&serde_json::Value::Bool(false))
        || result.pointer("/fit/converged") == Some(&serde_json::Value::Bool(false))
    {
        eprintln!("warning: solver did not converge; recorded as converged=false");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
