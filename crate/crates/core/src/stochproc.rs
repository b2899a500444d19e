//! Arrivals, losses and demands, and the per-step queue update.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use thiserror::Error;

use crate::netmodel::TransitionSystem;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Error, PartialEq)]
pub enum StochError {
    #[error("invalid stochastic parameters: {0}")]
    InvalidParams(String),
    #[error("queue {queue} would go negative at step {t} ({value})")]
    NegativeQueue { queue: String, t: u64, value: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemState {
    /// Ebits per queue.
    pub q: Vec<u64>,
    /// Pending demands per queue.
    pub d: Vec<u64>,
    pub t: u64,
}

impl SystemState {
    pub fn empty(n_queues: usize) -> Self {
        Self {
            q: vec![0; n_queues],
            d: vec![0; n_queues],
            t: 0,
        }
    }

    pub fn total_demand(&self) -> u64 {
        self.d.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Traffic {
    /// Mean demand rate per queue in Hz; zero off service queues.
    Poisson { beta: Vec<f64> },
    /// `count[e]` demands on queue `e` every `period` seconds, starting at step 0.
    Batch { count: Vec<u64>, period: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticParams {
    /// Generation rate per queue in Hz; must be zero on virtual queues.
    pub alpha: Vec<f64>,
    /// Per-step survival probability of a stored ebit.
    pub eta: f64,
    pub traffic: Traffic,
    /// Step duration in seconds.
    pub dt: f64,
    /// Per-physical-queue ebit cap.
    pub cap: Option<u64>,
    /// Multiplier on generation rates, in (0, 1].
    pub bsm_factor: f64,
    /// Per-step Poisson mean for every physical queue with nonzero `alpha`,
    /// replacing `bsm_factor * alpha * dt`; zero past the end.
    pub arrival_schedule: Option<Arc<Vec<f64>>>,
}

/// Survival probability over one step of a memory with lifetime `tau`.
pub fn eta_from_lifetime(dt: f64, tau: f64) -> f64 {
    (-dt / tau).exp()
}

impl StochasticParams {
    pub fn validate(&self, system: &TransitionSystem) -> Result<(), StochError> {
        let n = system.n_queues();
        let bad = |msg: String| Err(StochError::InvalidParams(msg));
        if self.alpha.len() != n {
            return bad(format!("alpha has {} entries for {n} queues", self.alpha.len()));
        }
        for (e, &a) in self.alpha.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return bad(format!("alpha on {} must be finite and nonnegative", system.queue_name(e)));
            }
            if a > 0.0 && !system.queues()[e].physical {
                return bad(format!("virtual queue {} cannot generate ebits", system.queue_name(e)));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.bsm_factor > 0.0 && self.bsm_factor <= 1.0) {
            return bad(format!("bsm_factor must lie in (0, 1], got {}", self.bsm_factor));
        }
        if self.cap == Some(0) {
            return bad("cap must be at least 1".into());
        }
        match &self.traffic {
            Traffic::Poisson { beta } => {
                if beta.len() != n {
                    return bad(format!("beta has {} entries for {n} queues", beta.len()));
                }
                if beta.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return bad("beta must be finite and nonnegative".into());
                }
            }
            Traffic::Batch { count, period } => {
                if count.len() != n {
                    return bad(format!("batch counts have {} entries for {n} queues", count.len()));
                }
                if !(period.is_finite() && *period > 0.0) {
                    return bad(format!("batch period must be positive, got {period}"));
                }
            }
        }
        Ok(())
    }

    /// Poisson mean of arrivals on queue `e` at step `t`.
    pub fn arrival_mean(&self, e: usize, t: u64) -> f64 {
        if self.alpha[e] == 0.0 {
            return 0.0;
        }
        match &self.arrival_schedule {
            Some(s) => s.get(t as usize).copied().unwrap_or(0.0),
            None => self.bsm_factor * self.alpha[e] * self.dt,
        }
    }

    /// Expected demand arrivals per step on queue `e`.
    pub fn demand_mean(&self, e: usize) -> f64 {
        match &self.traffic {
            Traffic::Poisson { beta } => beta[e] * self.dt,
            Traffic::Batch { count, period } => count[e] as f64 * self.dt / period,
        }
    }

    pub fn is_service_queue(&self, e: usize) -> bool {
        match &self.traffic {
            Traffic::Poisson { beta } => beta[e] > 0.0,
            Traffic::Batch { count, .. } => count[e] > 0,
        }
    }
}

/// Whether a batch fires at step `t`: step 0 and every step at which
/// `t * dt` reaches a new multiple of `period`.
pub fn batch_fires(t: u64, dt: f64, period: f64) -> bool {
    let ratio = period / dt;
    if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) && ratio.round() >= 1.0 {
        return t % ratio.round() as u64 == 0;
    }
    if t == 0 {
        return true;
    }
    let k = |s: u64| (s as f64 * dt / period + 1e-9).floor();
    k(t) > k(t - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepRealization {
    pub a: Vec<u64>,
    pub l: Vec<u64>,
    pub b: Vec<u64>,
}

fn poisson(mean: f64, rng: &mut SimRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Losses drawn on the start-of-step snapshot.
pub fn sample_losses(state: &SystemState, params: &StochasticParams, rng: &mut SimRng) -> Vec<u64> {
    let p = 1.0 - params.eta;
    state
        .q
        .iter()
        .map(|&q| {
            if q == 0 || p <= 0.0 {
                0
            } else if p >= 1.0 {
                q
            } else {
                Binomial::new(q, p).expect("valid binomial").sample(rng)
            }
        })
        .collect()
}

/// Arrivals on physical queues, clipped to the cap when one is set.
pub fn sample_arrivals(state: &SystemState, params: &StochasticParams, rng: &mut SimRng) -> Vec<u64> {
    (0..state.q.len())
        .map(|e| {
            let a = poisson(params.arrival_mean(e, state.t), rng);
            match params.cap {
                Some(cap) => a.min(cap.saturating_sub(state.q[e])),
                None => a,
            }
        })
        .collect()
}

pub fn sample_demands(state: &SystemState, params: &StochasticParams, rng: &mut SimRng) -> Vec<u64> {
    match &params.traffic {
        Traffic::Poisson { beta } => beta.iter().map(|&b| poisson(b * params.dt, rng)).collect(),
        Traffic::Batch { count, period } => {
            if batch_fires(state.t, params.dt, *period) {
                count.clone()
            } else {
                vec![0; count.len()]
            }
        }
    }
}

/// Draws the step's randomness in fixed order: losses, arrivals, demands.
pub fn sample_step(state: &SystemState, params: &StochasticParams, rng: &mut SimRng) -> StepRealization {
    let l = sample_losses(state, params, rng);
    let a = sample_arrivals(state, params, rng);
    let b = sample_demands(state, params, rng);
    StepRealization { a, l, b }
}

/// `q' = q - l + a + M̃ r`, `d' = max(d + b + Ñ r, 0)`, `t' = t + 1`.
pub fn advance(
    state: &SystemState,
    real: &StepRealization,
    r: &[u64],
    system: &TransitionSystem,
) -> Result<SystemState, StochError> {
    let delta = system.apply_m_tilde(r);
    let nt = system.n_transitions();
    let mut q = Vec::with_capacity(state.q.len());
    let mut d = Vec::with_capacity(state.d.len());
    for e in 0..state.q.len() {
        let v = state.q[e] as i64 - real.l[e] as i64 + real.a[e] as i64 + delta[e];
        if v < 0 {
            return Err(StochError::NegativeQueue {
                queue: system.queue_name(e),
                t: state.t,
                value: v,
            });
        }
        q.push(v as u64);
        d.push((state.d[e] + real.b[e]).saturating_sub(r[nt + e]));
    }
    Ok(SystemState { q, d, t: state.t + 1 })
}
