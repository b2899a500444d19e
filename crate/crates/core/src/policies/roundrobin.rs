use crate::netmodel::{NetworkSpec, TransitionSystem};
use crate::stochproc::SimRng;

use super::greedy::{exact_view, greedy_decision};
use super::{Decision, DecisionContext, PolicyError, SchedulingPolicy};

/// Alternates greedy service between two single-route commodities.
///
/// With demand on one commodity only, that commodity is served; with demand
/// on both, the commodity `floor(t·dt / period) mod 2` is served.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    period: f64,
    modes: [Mode; 2],
}

#[derive(Debug, Clone)]
struct Mode {
    queue: usize,
    transitions: Vec<bool>,
}

impl RoundRobin {
    pub fn new(spec: &NetworkSpec, system: &TransitionSystem, period: f64) -> Result<Self, PolicyError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(PolicyError::Config(format!("roundrobin period must be positive, got {period}")));
        }
        if spec.pairs.len() != 2 || spec.pairs.iter().any(|p| p.routes.len() != 1) {
            return Err(PolicyError::Config(
                "roundrobin needs exactly two service pairs with one route each".into(),
            ));
        }
        let mode = |k: usize| -> Result<Mode, PolicyError> {
            let pair = &spec.pairs[k];
            let route = &pair.routes[0];
            let pos = |v| route.iter().position(|&x| x == v);
            let transitions = system
                .transitions()
                .iter()
                .map(|tr| match (pos(tr.i), pos(tr.j), pos(tr.k)) {
                    (Some(a), Some(m), Some(b)) => a.min(b) < m && m < a.max(b),
                    _ => false,
                })
                .collect();
            let queue = system
                .queue_of(pair.alice, pair.bob)
                .ok_or_else(|| PolicyError::Config("service pair has no queue".into()))?;
            Ok(Mode { queue, transitions })
        };
        Ok(Self {
            period,
            modes: [mode(0)?, mode(1)?],
        })
    }

    /// Commodity served at step `t`, given which commodities have demand.
    pub fn active(&self, t: u64, dt: f64, pending: [bool; 2]) -> Option<usize> {
        match pending {
            [false, false] => None,
            [true, false] => Some(0),
            [false, true] => Some(1),
            [true, true] => Some(((t as f64 * dt / self.period + 1e-9).floor() as u64 % 2) as usize),
        }
    }
}

impl SchedulingPolicy for RoundRobin {
    fn id(&self) -> String {
        "roundrobin".into()
    }

    fn decide(&self, ctx: &DecisionContext<'_>, rng: &mut SimRng) -> Result<Decision, PolicyError> {
        let (avail, demand, _) = exact_view(ctx);
        let pending = [demand[self.modes[0].queue] > 0, demand[self.modes[1].queue] > 0];
        let Some(k) = self.active(ctx.state.t, ctx.params.dt, pending) else {
            return Ok(Decision::zero(ctx.system.dim()));
        };
        let mode = &self.modes[k];
        let mut service = vec![false; ctx.system.n_queues()];
        service[mode.queue] = true;
        Ok(Decision {
            r: greedy_decision(ctx.system, &avail, &demand, &service, Some(&mode.transitions), rng),
            fell_back: false,
        })
    }
}
