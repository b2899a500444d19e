//! Scheduling policies behind a common trait, selected by name at runtime.

mod greedy;
mod info;
mod memo;
mod optimizing;
mod roundrobin;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use qns_ipsolver::SolveOptions;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{NetworkSpec, TransitionSystem};
use crate::stochproc::{SimRng, StepRealization, StochasticParams, SystemState};

pub use greedy::{greedy_decision, Greedy};
pub use info::{effective_rhs, owns_column, Bounds};
pub use memo::{SolveCache, DEFAULT_MEMO_CAPACITY};
pub use optimizing::{build_instance, Objective, Optimizing};
pub use roundrobin::RoundRobin;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy family {0:?}")]
    UnknownFamily(String),
    #[error("policy configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] qns_ipsolver::SolveError),
}

/// Which step realizations a policy may look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoLevel {
    /// Exact arrivals, losses and demands everywhere.
    #[serde(alias = "FI")]
    Fi,
    /// Snapshot plus averages only.
    #[serde(alias = "PI")]
    Pi,
    /// Each node sees exact values on its own queues and averages elsewhere.
    #[serde(alias = "LI")]
    Li,
}

impl fmt::Display for InfoLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfoLevel::Fi => "fi",
            InfoLevel::Pi => "pi",
            InfoLevel::Li => "li",
        })
    }
}

impl FromStr for InfoLevel {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fi" => Ok(InfoLevel::Fi),
            "pi" => Ok(InfoLevel::Pi),
            "li" => Ok(InfoLevel::Li),
            other => Err(PolicyError::Config(format!("unknown information level {other:?}"))),
        }
    }
}

/// Everything a policy may consult for one step. Policies restrict
/// themselves to the parts their information level allows.
pub struct DecisionContext<'a> {
    pub system: &'a TransitionSystem,
    pub params: &'a StochasticParams,
    /// Start-of-step snapshot.
    pub state: &'a SystemState,
    pub real: &'a StepRealization,
    pub cache: Option<&'a SolveCache>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    /// Swap counts, then consumption counts.
    pub r: Vec<u64>,
    /// Solver budget ran out and the greedy decision was used instead.
    pub fell_back: bool,
}

impl Decision {
    pub fn zero(dim: usize) -> Self {
        Self {
            r: vec![0; dim],
            fell_back: false,
        }
    }
}

pub trait SchedulingPolicy: Send + Sync {
    /// Identifier used in outputs, e.g. `maxweight-fi`.
    fn id(&self) -> String;

    fn decide(&self, ctx: &DecisionContext<'_>, rng: &mut SimRng) -> Result<Decision, PolicyError>;
}

/// How to build one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub family: String,
    #[serde(default = "default_info")]
    pub info: InfoLevel,
    /// Alternation period in seconds (round-robin only).
    #[serde(default)]
    pub period: Option<f64>,
}

fn default_info() -> InfoLevel {
    InfoLevel::Fi
}

impl PolicyConfig {
    pub fn new(family: &str, info: InfoLevel) -> Self {
        Self {
            family: family.to_string(),
            info,
            period: None,
        }
    }
}

/// Scenario data a policy constructor may need.
pub struct PolicySetup<'a> {
    pub spec: &'a NetworkSpec,
    pub system: &'a TransitionSystem,
    pub solve_options: SolveOptions,
}

type Constructor = Box<dyn Fn(&PolicyConfig, &PolicySetup<'_>) -> Result<Box<dyn SchedulingPolicy>, PolicyError> + Send + Sync>;

pub struct PolicyRegistry {
    constructors: BTreeMap<String, Constructor>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut reg = Self {
            constructors: BTreeMap::new(),
        };
        reg.register("greedy", |_, _| Ok(Box::new(Greedy)));
        reg.register("maxweight", |cfg, setup| {
            Ok(Box::new(Optimizing::new(Objective::Linear, cfg.info, setup.solve_options)))
        });
        reg.register("quadratic", |cfg, setup| {
            Ok(Box::new(Optimizing::new(Objective::Quadratic, cfg.info, setup.solve_options)))
        });
        reg.register("roundrobin", |cfg, setup| {
            let period = cfg
                .period
                .ok_or_else(|| PolicyError::Config("roundrobin needs `period` in seconds".into()))?;
            Ok(Box::new(RoundRobin::new(setup.spec, setup.system, period)?))
        });
        reg
    }
}

impl PolicyRegistry {
    pub fn register<F>(&mut self, family: &str, ctor: F)
    where
        F: Fn(&PolicyConfig, &PolicySetup<'_>) -> Result<Box<dyn SchedulingPolicy>, PolicyError> + Send + Sync + 'static,
    {
        self.constructors.insert(family.to_string(), Box::new(ctor));
    }

    pub fn families(&self) -> Vec<&str> {
        self.constructors.keys().map(String::as_str).collect()
    }

    pub fn build(&self, cfg: &PolicyConfig, setup: &PolicySetup<'_>) -> Result<Box<dyn SchedulingPolicy>, PolicyError> {
        let ctor = self
            .constructors
            .get(&cfg.family)
            .ok_or_else(|| PolicyError::UnknownFamily(cfg.family.clone()))?;
        ctor(cfg, setup)
    }
}
