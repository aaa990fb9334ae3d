//! Experiment configuration files.
//!
//! Configs are TOML documents: flat typed keys at the top level and one
//! table per concern (`[data]`, `[prior]`, `[policy]`, `[grid]`, ...). The
//! full grammar with defaults is documented in `docs/config.md`. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use jointprior_core::model_space::{Baseline, PolicyVariant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};
use crate::output::Format;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Sweep,
    Cv,
    Rjmcmc,
    Shrinkage,
    Simulate,
    PriorProbs,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Sweep => "sweep",
            Task::Cv => "cv",
            Task::Rjmcmc => "rjmcmc",
            Task::Shrinkage => "shrinkage",
            Task::Simulate => "simulate",
            Task::PriorProbs => "prior-probs",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub data: Option<DataSource>,
    #[serde(default)]
    pub prior: PriorTemplate,
    #[serde(default)]
    pub policy: PolicySection,
    pub grid: Option<Grid>,
    #[serde(default)]
    pub sweep: SweepSection,
    pub loglinear: Option<LoglinearSection>,
    #[serde(default)]
    pub rjmcmc: RjSection,
    #[serde(default)]
    pub shrinkage: ShrinkageSection,
    #[serde(default)]
    pub cv: CvSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorName {
    Dfn,
    NottKohn,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Regression data; `response` names the response column.
    Csv { path: PathBuf, response: String },
    /// Simulated regression data. `extra_correlations` appends covariates with
    /// these exact sample correlations to covariate `extra_target` (1-based).
    Generator {
        name: GeneratorName,
        #[serde(default)]
        extra_correlations: Vec<f64>,
        #[serde(default = "default_extra_target")]
        extra_target: usize,
        /// Restrict the model space to these 1-based covariates (after extras are added).
        #[serde(default)]
        covariates: Vec<usize>,
    },
    /// Contingency table; the factor layout comes from `[loglinear]`.
    Contingency { path: PathBuf },
}

fn default_extra_target() -> usize {
    4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    #[default]
    Gprior,
    Independence,
}

/// Parameter prior template for linear models: `β | σ² ~ N(0, σ² c² Σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorTemplate {
    pub base: BaseKind,
    /// `α = λ = 0` selects the improper `σ²` prior (kernel convention).
    pub alpha: f64,
    pub lambda: f64,
    pub intercept: bool,
}

impl Default for PriorTemplate {
    fn default() -> Self {
        Self { base: BaseKind::Gprior, alpha: 0.01, lambda: 0.01, intercept: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineConfig {
    Constant,
    PerDimension { weight: f64 },
    Calibrated { n0: f64, psi0: f64 },
}

impl BaselineConfig {
    pub fn to_baseline(&self) -> Baseline {
        match *self {
            BaselineConfig::Constant => Baseline::Constant,
            BaselineConfig::PerDimension { weight } => Baseline::PerDimension { weight },
            BaselineConfig::Calibrated { n0, psi0 } => Baseline::Calibrated { n0, psi0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub variants: Vec<PolicyVariant>,
    pub baseline: BaselineConfig,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self { variants: vec![PolicyVariant::Uniform], baseline: BaselineConfig::Constant }
    }
}

/// Log-spaced grid `10^{log10_min} … 10^{log10_max}` with `count` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub log10_min: f64,
    pub log10_max: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(BenchError::Parse("grid count must be at least 1".into()));
        }
        if !self.log10_min.is_finite() || !self.log10_max.is_finite() || self.log10_min > self.log10_max {
            return Err(BenchError::Parse("grid needs finite log10_min <= log10_max".into()));
        }
        if self.count == 1 {
            return Ok(vec![10f64.powf(self.log10_min)]);
        }
        let step = (self.log10_max - self.log10_min) / (self.count - 1) as f64;
        Ok((0..self.count).map(|i| 10f64.powf(self.log10_min + step * i as f64)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub top_k: usize,
    /// Models reported at every grid point, written as covariate labels joined
    /// by `+` (for example `"X4+X5"`; `"1"` is the intercept-only model).
    pub watch: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { top_k: 5, watch: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub name: String,
    /// Level count (labels `1 … L`) or explicit level labels.
    pub levels: Levels,
}

impl FactorConfig {
    pub fn labels(&self) -> Vec<String> {
        match &self.levels {
            Levels::Count(l) => (1..=*l).map(|i| i.to_string()).collect(),
            Levels::Labels(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Df,
    Ks,
    KsDf,
    Ind,
    /// IND with the informative `HA` block of KS, scaled by the identity.
    IndHa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermScaleConfig {
    XtxInverse,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermOverride {
    pub term: String,
    pub k2: f64,
    pub scale: Option<TermScaleConfig>,
    pub mean: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoglinearSection {
    pub factors: Vec<FactorConfig>,
    pub forced: Vec<String>,
    pub candidates: Vec<String>,
    /// Named prior; ignored terms fall back to `default_k2`/`default_scale`.
    pub preset: Option<Preset>,
    /// `k²` used by the KS preset for the weakly informative terms.
    pub ks_k2: Option<f64>,
    pub default_k2: Option<f64>,
    pub default_scale: Option<TermScaleConfig>,
    #[serde(default)]
    pub terms: Vec<TermOverride>,
    /// `log p(m) = −(d/2) log 2` when true.
    #[serde(default)]
    pub half_log2_baseline: bool,
    /// Synthetic counts: generate from this model (maximal terms, e.g. `"OH+A"`).
    pub simulate_from: Option<String>,
    pub simulate_intercept: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RjSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub within_model_scale: f64,
    pub between_moves: usize,
    pub chains: usize,
    /// Dump of every chain state; the chain index is appended to the file stem.
    pub chain_dump: Option<PathBuf>,
    /// Dispersion for linear targets.
    pub c2: f64,
}

impl Default for RjSection {
    fn default() -> Self {
        Self {
            iterations: 200_000,
            burn_in: 20_000,
            thin: 1,
            within_model_scale: 1.0,
            between_moves: 1,
            chains: 1,
            chain_dump: None,
            c2: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPolicyKind {
    Fixed,
    InverseC,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShrinkageSection {
    pub n: usize,
    pub beta_hat: f64,
    pub sigma2: f64,
    pub k_policy: KPolicyKind,
    pub k: f64,
    /// Grid over `c⁻²`.
    pub grid: Grid,
}

impl Default for ShrinkageSection {
    fn default() -> Self {
        Self {
            n: 10,
            beta_hat: 1.0,
            sigma2: 1.0,
            k_policy: KPolicyKind::Fixed,
            k: 1.0,
            grid: Grid { log10_min: -4.0, log10_max: 2.0, count: 121 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvModeKind {
    Exact,
    Gelfand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub mode: CvModeKind,
    pub weighting: jointprior_core::linear_exact::CvWeighting,
    pub draws: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self { mode: CvModeKind::Exact, weighting: jointprior_core::linear_exact::CvWeighting::Posterior, draws: 100_000 }
    }
}

/// A parsed config with the digest of its source text.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| BenchError::Parse(format!("config: {e}")))?;
    validate(&config)?;
    Ok(LoadedConfig { config, sha256: sha256_hex(text.as_bytes()) })
}

/// Reads a config file. Relative data, output and dump paths are resolved
/// against the directory holding the config.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path.display().to_string(), e))?;
    let mut loaded = parse_config(&text)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    };
    let c = &mut loaded.config;
    match &mut c.data {
        Some(DataSource::Csv { path, .. }) | Some(DataSource::Contingency { path }) => fix(path),
        _ => {}
    }
    if let Some(p) = &mut c.output {
        fix(p);
    }
    if let Some(p) = &mut c.rjmcmc.chain_dump {
        fix(p);
    }
    Ok(loaded)
}

fn validate(c: &ExperimentConfig) -> Result<()> {
    if let Some(g) = &c.grid {
        g.values()?;
    }
    if c.policy.variants.is_empty() {
        return Err(BenchError::Parse("policy.variants must not be empty".into()));
    }
    if c.prior.alpha < 0.0 || c.prior.lambda < 0.0 {
        return Err(BenchError::Parse("prior.alpha and prior.lambda must be nonnegative".into()));
    }
    if !(c.rjmcmc.c2 > 0.0) || !c.rjmcmc.c2.is_finite() {
        return Err(BenchError::Parse("rjmcmc.c2 must be positive".into()));
    }
    Ok(())
}

/// A seed is mandatory for tasks that simulate or sample.
pub fn require_seed(c: &ExperimentConfig) -> Result<u64> {
    c.seed.ok_or_else(|| BenchError::Parse(format!("task {} needs a seed (config `seed` or --seed)", c.task.name())))
}
