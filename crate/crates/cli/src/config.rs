//! TOML experiment configuration. Durations are in seconds, rates in Hz.

use std::path::{Path, PathBuf};

use qns_core::engine::{Axis, DEFAULT_THRESHOLD};
use qns_core::netmodel::{TopologyParams, DEFAULT_PENALTY};
use qns_core::policies::{InfoLevel, PolicyConfig, DEFAULT_MEMO_CAPACITY};
use qns_ipsolver::SolveOptions;
use qns_satlink::{LinkHardware, OpticsParams};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub topology: Option<TopologyParams>,
    #[serde(default)]
    pub pairs: PairsConfig,
    pub stochastic: Option<StochasticConfig>,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub policies: Vec<PolicyEntry>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub engine: EngineConfig,
    pub satlink: Option<SatlinkConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsConfig {
    /// Explicit main pairs; empty selects two automatically.
    #[serde(default)]
    pub main: Vec<PairEntry>,
    /// Edge removal probability of the automatic selection.
    #[serde(default = "default_removal")]
    pub edge_removal_prob: f64,
    #[serde(default)]
    pub parasitic: usize,
    #[serde(default = "default_routes")]
    pub routes_per_pair: usize,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
}

impl Default for PairsConfig {
    fn default() -> Self {
        Self {
            main: Vec::new(),
            edge_removal_prob: default_removal(),
            parasitic: 0,
            routes_per_pair: default_routes(),
            penalty: default_penalty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub alice: String,
    pub bob: String,
    /// Fixed routes as node names, e.g. `"ABCDE"`; empty computes them.
    #[serde(default)]
    pub routes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub steps: u64,
    /// Per-step survival probability; takes precedence over `memory_lifetime_s`.
    pub eta: Option<f64>,
    pub memory_lifetime_s: Option<f64>,
    pub alpha_hz: f64,
    pub cap: Option<u64>,
    #[serde(default = "default_one")]
    pub bsm_factor: f64,
    #[serde(default)]
    pub transient_discard: u64,
    /// Satellite link trace driving generation on every physical link.
    pub arrival_trace: Option<PathBuf>,
    #[serde(default)]
    pub arrival_trace_start_s: f64,
}

impl StochasticConfig {
    pub fn resolved_eta(&self) -> Result<f64, CliError> {
        match (self.eta, self.memory_lifetime_s) {
            (Some(eta), _) => Ok(eta),
            (None, Some(tau)) if tau > 0.0 => Ok(qns_core::stochproc::eta_from_lifetime(self.dt_s, tau)),
            (None, Some(tau)) => Err(CliError::Config(format!("memory_lifetime_s must be positive, got {tau}"))),
            (None, None) => Err(CliError::Config("stochastic: set `eta` or `memory_lifetime_s`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficConfig {
    Poisson {
        /// Loads of the two main pairs for `run`.
        #[serde(default)]
        main_loads_hz: [f64; 2],
        #[serde(default)]
        parasitic_load_hz: f64,
    },
    /// `count` demands on each main pair every `period_s`.
    Batch { count: [u64; 2], period_s: f64 },
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig::Poisson {
            main_loads_hz: [0.0; 2],
            parasitic_load_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub family: String,
    #[serde(default = "default_info")]
    pub info: InfoLevel,
    pub period_s: Option<f64>,
}

impl PolicyEntry {
    pub fn to_policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            family: self.family.clone(),
            info: self.info,
            period: self.period_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub axis1: Axis,
    pub axis2: Axis,
    #[serde(default = "default_loads")]
    pub parasitic_loads_hz: Vec<f64>,
    #[serde(default = "default_sets")]
    pub parasitic_sets: usize,
    #[serde(default = "default_true")]
    pub skip_dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Overrides `QNS_WORKERS`.
    pub workers: Option<usize>,
    #[serde(default = "default_memo")]
    pub memo_capacity: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Zero disables the time limit.
    #[serde(default = "default_time_limit")]
    pub solver_time_limit_s: f64,
    #[serde(default = "default_max_nodes")]
    pub solver_max_nodes: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            workers: None,
            memo_capacity: default_memo(),
            master_seed: 0,
            solver_time_limit_s: default_time_limit(),
            solver_max_nodes: default_max_nodes(),
        }
    }
}

impl EngineConfig {
    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        let t = self.solver_time_limit_s;
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::Config(format!("solver_time_limit_s must be >= 0, got {t}")));
        }
        Ok(SolveOptions {
            max_nodes: self.solver_max_nodes,
            time_limit: (t > 0.0).then(|| std::time::Duration::from_secs_f64(t)),
        })
    }

    /// Config key, then `QNS_WORKERS`, then the available parallelism.
    pub fn resolved_workers(&self, env: Option<&str>) -> Result<usize, CliError> {
        if let Some(w) = self.workers {
            return if w == 0 {
                Err(CliError::Config("engine.workers must be positive".into()))
            } else {
                Ok(w)
            };
        }
        if let Some(v) = env {
            return match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(w),
                _ => Err(CliError::Config(format!("QNS_WORKERS must be a positive integer, got {v:?}"))),
            };
        }
        Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatlinkConfig {
    #[serde(default)]
    pub traces: Vec<PathBuf>,
    /// Satellite memory sizes to evaluate; defaults to `hardware.m_s`.
    #[serde(default)]
    pub m_s: Vec<u64>,
    #[serde(default)]
    pub optics: OpticsParams,
    #[serde(default)]
    pub hardware: LinkHardware,
}

fn default_removal() -> f64 {
    0.5
}

fn default_routes() -> usize {
    1
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}

fn default_dt() -> f64 {
    1e-6
}

fn default_one() -> f64 {
    1.0
}

fn default_info() -> InfoLevel {
    InfoLevel::Fi
}

fn default_loads() -> Vec<f64> {
    vec![0.0]
}

fn default_sets() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_memo() -> usize {
    DEFAULT_MEMO_CAPACITY
}

fn default_time_limit() -> f64 {
    0.1
}

fn default_max_nodes() -> u64 {
    1_000_000
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads `path` and makes relative file references relative to its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(TopologyParams::Custom { path }) = &mut self.topology {
            fix(path);
        }
        if let Some(s) = &mut self.stochastic {
            if let Some(p) = &mut s.arrival_trace {
                fix(p);
            }
        }
        if let Some(s) = &mut self.satlink {
            s.traces.iter_mut().for_each(fix);
        }
    }

    pub fn topology(&self) -> Result<&TopologyParams, CliError> {
        self.topology
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [topology] section".into()))
    }

    pub fn stochastic(&self) -> Result<&StochasticConfig, CliError> {
        self.stochastic
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [stochastic] section".into()))
    }

    pub fn grid(&self) -> Result<&GridConfig, CliError> {
        self.grid.as_ref().ok_or_else(|| CliError::Config("missing [grid] section".into()))
    }

    pub fn satlink(&self) -> Result<&SatlinkConfig, CliError> {
        self.satlink
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [satlink] section".into()))
    }

    pub fn policy_configs(&self) -> Result<Vec<PolicyConfig>, CliError> {
        if self.policies.is_empty() {
            return Err(CliError::Config("no [[policies]] entries".into()));
        }
        Ok(self.policies.iter().map(PolicyEntry::to_policy_config).collect())
    }
}
