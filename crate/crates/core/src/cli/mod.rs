//! Experiment configuration and orchestration behind the `dual-align` binary.
//!
//! A run is described by one TOML file. Every section is optional except the
//! top-level `experiment` key:
//!
//! ```toml
//! experiment = "synthetic_align"   # saddle | synthetic_align | toy_da
//! objective = "dual_kernel"        # primal | wgan | dual_linear | dual_kernel | mmd
//! output_dir = "out"
//!
//! [optimizer]
//! lr_theta = 0.002
//! iterations = 5000
//!
//! [dual]
//! lambda = 10.0
//!
//! [grid]
//! lr_theta = [0.0005, 0.002, 0.005]
//! lr_alpha = [0.0005, 0.002, 0.005]
//! objectives = ["dual_linear", "primal"]
//! ```

mod runner;
pub mod svg;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::ShiftSpec;
use crate::error::Error;
use crate::kernels::{median_bandwidth, KernelSpec};
use crate::matchers::MatcherParams;
use crate::optimizers::{DualSettings, GeneratorLoss, OptimizerConfig, PrimalObjective, PrimalSettings, SaddleState};
use crate::pointset::{generate, Domain, GeneratorSpec, PointSet};

pub use runner::{
    compare_grid, gen_data, run_experiment, run_saddle, GridOutcome, ObjectiveRanking, RunRecord, SUMMARY_HEADER,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Saddle,
    SyntheticAlign,
    ToyDa,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Primal,
    Wgan,
    #[default]
    DualLinear,
    DualKernel,
    Mmd,
}

impl ObjectiveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveKind::Primal => "primal",
            ObjectiveKind::Wgan => "wgan",
            ObjectiveKind::DualLinear => "dual_linear",
            ObjectiveKind::DualKernel => "dual_kernel",
            ObjectiveKind::Mmd => "mmd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Primal, Self::Wgan, Self::DualLinear, Self::DualKernel, Self::Mmd].into_iter().find(|o| o.as_str() == s)
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    #[default]
    Affine,
    FreePoints,
}

impl MatcherKind {
    pub fn identity(&self, count: usize, dim: usize) -> MatcherParams {
        match self {
            MatcherKind::Affine => MatcherParams::affine_identity(dim),
            MatcherKind::FreePoints => MatcherParams::free_points(count, dim),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Gaussian bandwidth σ; the median pairwise distance of `A ∪ B` when absent.
    pub bandwidth: Option<f64>,
}

/// Settings of the logistic discriminator and the WGAN critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimalConfig {
    pub lambda: f64,
    pub gp_weight: f64,
    pub generator_loss: GeneratorLoss,
}

impl Default for PrimalConfig {
    fn default() -> Self {
        let p = PrimalSettings::default();
        PrimalConfig { lambda: p.lambda, gp_weight: p.gp_weight, generator_loss: p.generator_loss }
    }
}

impl PrimalConfig {
    pub fn settings(&self, objective: PrimalObjective) -> PrimalSettings {
        PrimalSettings {
            objective,
            lambda: self.lambda,
            gp_weight: self.gp_weight,
            generator_loss: self.generator_loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaddleConfig {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub steps: usize,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig { x0: 1.0, y0: 0.0, step: 0.1, steps: 200 }
    }
}

impl SaddleConfig {
    pub fn start(&self) -> SaddleState {
        SaddleState { x: self.x0, y: self.y0, step: self.step }
    }
}

/// Hyperparameter lists; an empty list keeps the base value. When only one of
/// `lr_alpha` and `lr_disc` is given, it drives both, so one grid serves the
/// dual and the primal objectives alike.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lr_theta: Vec<f64>,
    pub lr_alpha: Vec<f64>,
    pub lr_disc: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Objectives to compare; the top-level `objective` when empty.
    pub objectives: Vec<ObjectiveKind>,
    /// Largest allowed number of runs.
    pub cap: usize,
}

/// Learning rates of the standard 3x3 grid, used for `lr_theta` and for the
/// adversary rate.
pub const STANDARD_RATES: [f64; 3] = [0.0005, 0.002, 0.005];

impl GridConfig {
    /// The standard 9-point learning-rate grid over `objectives`.
    pub fn standard(objectives: Vec<ObjectiveKind>) -> Self {
        GridConfig {
            lr_theta: STANDARD_RATES.to_vec(),
            lr_alpha: STANDARD_RATES.to_vec(),
            objectives,
            ..Default::default()
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { lr_theta: vec![], lr_alpha: vec![], lr_disc: vec![], lambda: vec![], objectives: vec![], cap: 200 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    /// Iterations drawn in the point-cloud snapshot figure; four evenly spaced
    /// iterations when empty.
    pub snapshot_iters: Vec<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Source blob of the default synthetic pair.
pub fn default_source() -> GeneratorSpec {
    GeneratorSpec::gaussian_blob(vec![-2.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 100, 11)
}

/// Target blob of the default synthetic pair: mean 4 to the right of the
/// source, stretched and tilted.
pub fn default_target() -> GeneratorSpec {
    GeneratorSpec::gaussian_blob(vec![2.0, 0.0], vec![vec![2.0, 0.6], vec![0.6, 0.5]], 100, 12)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default = "default_source")]
    pub source: GeneratorSpec,
    #[serde(default = "default_target")]
    pub target: GeneratorSpec,
    #[serde(default)]
    pub matcher: MatcherKind,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub dual: DualSettings,
    #[serde(default)]
    pub primal: PrimalConfig,
    #[serde(default)]
    pub saddle: SaddleConfig,
    #[serde(default)]
    pub toy_da: ShiftSpec,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub plots: PlotConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Replaces the optimizer seed and the source and target generator seeds
    /// (`seed` and `seed + 1`).
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// A configuration with every section at its default.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            objective: ObjectiveKind::default(),
            source: default_source(),
            target: default_target(),
            matcher: MatcherKind::default(),
            kernel: KernelConfig::default(),
            optimizer: OptimizerConfig::default(),
            dual: DualSettings::default(),
            primal: PrimalConfig::default(),
            saddle: SaddleConfig::default(),
            toy_da: ShiftSpec::default(),
            grid: None,
            plots: PlotConfig::default(),
            output_dir: default_output_dir(),
            seed: None,
        }
    }

    /// Applies the top-level `seed`, if any.
    pub fn resolve_seed(&mut self) {
        if let Some(s) = self.seed {
            self.optimizer.seed = s;
            self.source.seed = s;
            self.target.seed = s.wrapping_add(1);
            self.toy_da.seed = s;
        }
    }

    /// Source and target point sets, target tagged as such.
    pub fn point_sets(&self) -> Result<(PointSet, PointSet), Error> {
        let a = generate(&self.source)?;
        let b = generate(&self.target)?.with_tag(Domain::TargetB);
        Ok((a, b))
    }

    pub fn gaussian_kernel(&self, a: &PointSet, b: &PointSet) -> Result<KernelSpec, Error> {
        let bw = self.kernel.bandwidth.unwrap_or_else(|| median_bandwidth(a.iter().chain(b.iter())));
        KernelSpec::gaussian(bw)
    }

    /// Semantic checks beyond what parsing enforces. Errors name the offending key.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let key = |k: &str, e: Error| (k.to_string(), e.to_string());
        self.optimizer.validate().map_err(|e| key(first_key(&e.to_string()), e))?;
        self.dual.validate().map_err(|e| key(first_key(&e.to_string()), e))?;
        self.primal.settings(PrimalObjective::Logistic).validate().map_err(|e| key(first_key(&e.to_string()), e))?;
        if let Some(bw) = self.kernel.bandwidth {
            KernelSpec::gaussian(bw).map_err(|e| key("bandwidth", e))?;
        }
        if !(self.saddle.step >= 0.0 && self.saddle.step.is_finite() && self.saddle.x0.is_finite() && self.saddle.y0.is_finite()) {
            return Err(("step".into(), "saddle state and step must be finite, step >= 0".into()));
        }
        if let Some(g) = &self.grid {
            let lists = [("lr_theta", &g.lr_theta), ("lr_alpha", &g.lr_alpha), ("lr_disc", &g.lr_disc), ("lambda", &g.lambda)];
            for (name, list) in lists {
                if list.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err((name.into(), format!("grid values for {name} must be finite and nonnegative")));
                }
            }
            if g.lambda.iter().any(|v| *v <= 0.0) {
                return Err(("lambda".into(), "grid values for lambda must be positive".into()));
            }
        }
        Ok(())
    }

    /// Iterations drawn in snapshot figures.
    pub fn snapshot_iters(&self) -> Vec<usize> {
        if !self.plots.snapshot_iters.is_empty() {
            return self.plots.snapshot_iters.clone();
        }
        let n = self.optimizer.iterations;
        let mut v = vec![0, n / 10, n / 3, n];
        v.dedup();
        v
    }
}

/// Picks the config key named at the start of a validation message.
fn first_key(msg: &str) -> &str {
    const KEYS: [&str; 14] = [
        "lr_theta", "lr_disc", "lr_alpha", "iterations", "trace_every", "batch_size", "snapshot_every", "lambda1",
        "lambda2", "clamp_eps", "alpha_init", "gp_weight", "lambda", "mode",
    ];
    let body = msg.trim_start_matches("invalid configuration: ");
    KEYS.iter().find(|k| body.starts_with(*k)).copied().unwrap_or(if body.contains("alternating") { "mode" } else { "" })
}

/// A configuration problem with the line it was found on, when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path, l, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// 1-based line of the first `key = ...` assignment, if any.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

/// Parses and validates a configuration held in memory; `path` only labels errors.
pub fn parse_config(text: &str, path: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = Some(e.span().map_or(1, |s| line_of_offset(text, s.start)));
        ConfigError { path: path.to_string(), line, message: e.message().trim().to_string() }
    })?;
    cfg.validate().map_err(|(key, message)| ConfigError {
        path: path.to_string(),
        line: if key.is_empty() { None } else { line_of_key(text, &key) },
        message,
    })?;
    Ok(cfg)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(Error::Io(e)))?;
    parse_config(&text, &path.display().to_string()).map_err(LoadError::Config)
}

/// Failure to obtain a configuration: a bad file (exit 1) or an unreadable one (exit 2).
#[derive(Debug)]
pub enum LoadError {
    Config(ConfigError),
    Io(Error),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Config(e) => e.fmt(f),
            LoadError::Io(e) => e.fmt(f),
        }
    }
}
