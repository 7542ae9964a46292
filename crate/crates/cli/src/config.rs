//! TOML run configuration. Every section is optional; a subcommand only
//! reads its own section and falls back to defaults for missing keys.

use crate::error::{CliError, Result};
use hugevar::dataio::{load_panel, standardize, transform_panel, Panel, TcodeSource};
use hugevar::dgp::{ChainSettings, Estimator, GridSpec, ScenarioKind};
use hugevar::engine::{ModelSpec, StorageChoice};
use hugevar::forecast::{ForecastConfig, Variant};
use hugevar::gausslin::StrategyPolicy;
use hugevar::shrinkage::{Concentration, PriorSpec};
use hugevar::stochvol::SvPriors;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub simulate: Option<SimulateSection>,
    pub fit: Option<FitSection>,
    pub forecast: Option<ForecastSection>,
    pub bench: Option<crate::bench::BenchConfig>,
}

impl RunConfig {
    /// Parse a config file. Relative data paths are resolved against the
    /// directory holding the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |d: &mut DataSection| {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
            if let Some(s) = d.tcodes.as_mut().filter(|s| s.is_relative()) {
                *s = base.join(&*s);
            }
        };
        if let Some(f) = cfg.fit.as_mut() {
            rebase(&mut f.data);
        }
        if let Some(f) = cfg.forecast.as_mut() {
            rebase(&mut f.data);
        }
        Ok(cfg)
    }
}

fn default_scenarios() -> Vec<String> {
    vec!["sparse".into()]
}

fn default_t_list() -> Vec<usize> {
    vec![50, 250]
}

fn default_m_list() -> Vec<usize> {
    vec![10]
}

fn default_estimators() -> Vec<String> {
    Estimator::ALL.iter().map(|e| e.tag().to_string()).collect()
}

fn default_reps() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<String>,
    #[serde(default = "default_t_list")]
    pub t_list: Vec<usize>,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    /// Tags (`DL1K`, `MN1e-3`, ...) or labels (`DL(1/K)`, ...).
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub chain: ChainSettings,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            scenarios: default_scenarios(),
            t_list: default_t_list(),
            m_list: default_m_list(),
            estimators: default_estimators(),
            reps: default_reps(),
            chain: ChainSettings::default(),
        }
    }
}

impl SimulateSection {
    pub fn grid(&self) -> Result<GridSpec> {
        let scenarios = self.scenarios.iter().map(|s| s.parse::<ScenarioKind>()).collect::<hugevar::Result<Vec<_>>>()?;
        let estimators = self.estimators.iter().map(|s| s.parse::<Estimator>()).collect::<hugevar::Result<Vec<_>>>()?;
        if scenarios.is_empty() || self.t_list.is_empty() || self.m_list.is_empty() {
            return Err(CliError::config("simulate needs at least one scenario, T and m"));
        }
        Ok(GridSpec {
            scenarios,
            t_list: self.t_list.clone(),
            m_list: self.m_list.clone(),
            estimators,
            reps: self.reps,
            chain: self.chain,
        })
    }
}

fn default_true() -> bool {
    true
}

/// Where a panel comes from and how it is prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    /// Two-column sidecar `name,tcode`; absent means a `tcode` header row.
    pub tcodes: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub transform: bool,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Subset and order of series; all series when absent.
    pub variables: Option<Vec<String>>,
}

impl DataSection {
    pub fn load(&self) -> Result<Panel> {
        let source = match &self.tcodes {
            Some(p) => TcodeSource::Sidecar(p.clone()),
            None => TcodeSource::HeaderRow,
        };
        let mut panel = load_panel(&self.path, &source)?;
        if let Some(v) = &self.variables {
            panel = panel.select(v)?;
        }
        if self.transform {
            panel = transform_panel(&panel)?;
        }
        if self.standardize {
            panel = standardize(&panel)?;
        }
        if panel.values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config("panel has missing values after preparation; set transform = true or clean the file"));
        }
        Ok(panel)
    }
}

fn default_p() -> usize {
    1
}

fn default_q() -> usize {
    1
}

fn default_prior() -> PriorSpec {
    PriorSpec::Dl { a: Concentration::OneOverK }
}

fn default_draws() -> usize {
    2000
}

fn default_burnin() -> usize {
    1000
}

fn default_thin() -> usize {
    1
}

/// Model keys mirroring `ModelSpec`; the seed is supplied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default = "default_prior")]
    pub prior: PriorSpec,
    #[serde(default)]
    pub sv_priors: SvPriors,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub strategy: StrategyPolicy,
    #[serde(default)]
    pub storage: StorageChoice,
}

impl Default for ModelSection {
    fn default() -> Self {
        toml::from_str("").expect("every model key has a default")
    }
}

impl ModelSection {
    pub fn spec(&self, seed: u64) -> Result<ModelSpec> {
        let mut s = ModelSpec::new(self.p, self.q, self.prior, self.draws, self.burnin, seed);
        s.intercept = self.intercept;
        s.sv_priors = self.sv_priors;
        s.thin = self.thin;
        s.strategy = self.strategy;
        s.storage = self.storage;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
}

fn default_steps() -> usize {
    100
}

fn default_warm_burnin() -> usize {
    500
}

/// One model scored in the forecast comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastModel {
    pub variant: Variant,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    pub data: DataSection,
    /// Settings shared by all compared models; each entry overrides `q`.
    #[serde(default)]
    pub model: ModelSection,
    pub initial_window: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub focus_variables: Vec<String>,
    #[serde(default = "default_warm_burnin")]
    pub warm_burnin: usize,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    pub models: Vec<ForecastModel>,
    /// Index into `models` used as the cumulative-score reference.
    #[serde(default)]
    pub benchmark: usize,
}

impl ForecastSection {
    pub fn configs(&self) -> Result<Vec<ForecastConfig>> {
        if self.models.is_empty() {
            return Err(CliError::config("forecast needs at least one entry in models"));
        }
        if self.benchmark >= self.models.len() {
            return Err(CliError::config(format!(
                "benchmark index {} is out of range for {} models",
                self.benchmark,
                self.models.len()
            )));
        }
        Ok(self
            .models
            .iter()
            .map(|m| ForecastConfig {
                initial_window: self.initial_window,
                steps: self.steps,
                focus_variables: self.focus_variables.clone(),
                variant: m.variant,
                q: m.q,
                warm_burnin: self.warm_burnin,
                warm_start: self.warm_start,
            })
            .collect())
    }
}
