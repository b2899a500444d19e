use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::netmodel::TransitionSystem;
use crate::policies::{DecisionContext, SchedulingPolicy, SolveCache};
use crate::stochproc::{advance, sample_step, SimRng, StochasticParams, SystemState};

use super::conflict::apply_decision;
use super::EngineError;

/// Target number of points in a demand trace.
pub const TRACE_POINTS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub steps: u64,
    /// Steps excluded from the metrics at the start of the run.
    pub transient_discard: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Demands arrived inside the metrics window.
    pub total_demand_arrived: u64,
    /// Demands served inside the metrics window.
    pub total_served: u64,
    /// Backlog at the start of the metrics window.
    pub initial_backlog: u64,
    /// Backlog at the end of the run.
    pub final_backlog: u64,
    /// `final_backlog / (initial_backlog + total_demand_arrived)`, 0 when nothing was pending.
    pub unserved_fraction: f64,
    /// Mean of `Σ_e d_e(t)` over the window.
    pub avg_backlog: f64,
    /// Max of `Σ_e d_e(t)` over the window.
    pub max_excursion: u64,
    /// `(t, Σ_e d_e(t))` every `max(1, steps / TRACE_POINTS)` steps.
    pub demand_trace: Vec<(u64, u64)>,
    /// Decision units the conflict engine dropped.
    pub dropped_units: u64,
    /// Steps on which an optimizing policy fell back to greedy.
    pub fallback_steps: u64,
}

/// Runs `cfg.steps` steps from an empty state.
///
/// Each step draws losses, arrivals and demands, asks the policy for a
/// decision, clips it through the conflict engine and advances the queues.
pub fn run_simulation(
    system: &TransitionSystem,
    params: &StochasticParams,
    policy: &dyn SchedulingPolicy,
    cfg: &RunConfig,
    cache: Option<&SolveCache>,
) -> Result<RunMetrics, EngineError> {
    if cfg.steps <= cfg.transient_discard {
        return Err(EngineError::InvalidParams(format!(
            "steps ({}) must exceed transient_discard ({})",
            cfg.steps, cfg.transient_discard
        )));
    }
    params.validate(system)?;
    let groups = system.columns_by_rank();
    let stride = (cfg.steps / TRACE_POINTS).max(1);
    let n = system.n_queues();
    let mut rng = SimRng::seed_from_u64(cfg.seed);
    let mut state = SystemState::empty(n);
    let mut m = RunMetrics {
        total_demand_arrived: 0,
        total_served: 0,
        initial_backlog: 0,
        final_backlog: 0,
        unserved_fraction: 0.0,
        avg_backlog: 0.0,
        max_excursion: 0,
        demand_trace: vec![(0, 0)],
        dropped_units: 0,
        fallback_steps: 0,
    };
    let mut backlog_sum = 0u128;
    for t in 0..cfg.steps {
        let in_window = t >= cfg.transient_discard;
        if t == cfg.transient_discard {
            m.initial_backlog = state.total_demand();
        }
        let real = sample_step(&state, params, &mut rng);
        let ctx = DecisionContext {
            system,
            params,
            state: &state,
            real: &real,
            cache,
        };
        let decision = policy.decide(&ctx, &mut rng)?;
        if decision.r.len() != system.dim() {
            return Err(EngineError::Invariant(format!(
                "policy {} returned {} entries for dimension {}",
                policy.id(),
                decision.r.len(),
                system.dim()
            )));
        }
        let avail: Vec<u64> = (0..n).map(|e| state.q[e] - real.l[e] + real.a[e]).collect();
        let demand: Vec<u64> = (0..n).map(|e| state.d[e] + real.b[e]).collect();
        let applied = apply_decision(system, &groups, &avail, &demand, &decision.r, &mut rng);
        state = advance(&state, &real, &applied.r, system).map_err(|e| EngineError::Invariant(e.to_string()))?;
        let backlog = state.total_demand();
        if in_window {
            m.total_demand_arrived += real.b.iter().sum::<u64>();
            m.total_served += applied.served;
            m.dropped_units += applied.dropped.iter().sum::<u64>();
            m.fallback_steps += decision.fell_back as u64;
            backlog_sum += backlog as u128;
            m.max_excursion = m.max_excursion.max(backlog);
        }
        if (t + 1) % stride == 0 {
            m.demand_trace.push((t + 1, backlog));
        }
    }
    m.final_backlog = state.total_demand();
    if m.final_backlog + m.total_served != m.initial_backlog + m.total_demand_arrived {
        return Err(EngineError::Invariant(format!(
            "demand audit failed: {} + {} served != {} + {} arrived",
            m.final_backlog, m.total_served, m.initial_backlog, m.total_demand_arrived
        )));
    }
    let pending = m.initial_backlog + m.total_demand_arrived;
    m.unserved_fraction = if pending == 0 {
        0.0
    } else {
        m.final_backlog as f64 / pending as f64
    };
    m.avg_backlog = backlog_sum as f64 / (cfg.steps - cfg.transient_discard) as f64;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_transition_system, chain, parse_route};
    use crate::policies::Greedy;
    use crate::stochproc::Traffic;

    fn link_params(sys: &TransitionSystem, alpha: f64, beta: f64) -> StochasticParams {
        StochasticParams {
            alpha: vec![alpha; sys.n_queues()],
            eta: 1.0,
            traffic: Traffic::Poisson {
                beta: vec![beta; sys.n_queues()],
            },
            dt: 1e-6,
            cap: None,
            bsm_factor: 1.0,
            arrival_schedule: None,
        }
    }

    fn single_link() -> TransitionSystem {
        build_transition_system(&chain(2), &[vec![0, 1]]).unwrap()
    }

    fn cfg(steps: u64, seed: u64) -> RunConfig {
        RunConfig {
            steps,
            transient_discard: 100,
            seed,
        }
    }

    #[test]
    fn zero_load_is_empty() {
        let sys = single_link();
        let m = run_simulation(&sys, &link_params(&sys, 5e5, 0.0), &Greedy, &cfg(2_000, 1), None).unwrap();
        assert_eq!(m.unserved_fraction, 0.0);
        assert_eq!(m.avg_backlog, 0.0);
        assert_eq!(m.max_excursion, 0);
    }

    #[test]
    fn overload_grows_linearly() {
        let sys = single_link();
        let steps = 20_000;
        let m = run_simulation(&sys, &link_params(&sys, 2e5, 4e5), &Greedy, &cfg(steps, 3), None).unwrap();
        // Drift per step is (beta - alpha) dt = 0.2.
        let expected = 0.2 * steps as f64;
        assert!((m.final_backlog as f64 - expected).abs() < 0.1 * expected, "{}", m.final_backlog);
        let mid = m.demand_trace[m.demand_trace.len() / 2].1 as f64;
        assert!((mid - expected / 2.0).abs() < 0.15 * expected / 2.0, "{mid}");
        assert!(m.unserved_fraction > 0.4);
    }

    #[test]
    fn deterministic_per_seed() {
        let g = chain(4);
        let sys = build_transition_system(&g, &[parse_route(&g, "ABCD").unwrap()]).unwrap();
        let mut p = link_params(&sys, 1e6, 0.0);
        for (e, q) in sys.queues().iter().enumerate() {
            if !q.physical {
                p.alpha[e] = 0.0;
            }
        }
        let ad = sys.queue_by_name("AD").unwrap();
        let mut beta = vec![0.0; sys.n_queues()];
        beta[ad] = 3e5;
        p.traffic = Traffic::Poisson { beta };
        p.eta = 0.9;
        let a = run_simulation(&sys, &p, &Greedy, &cfg(5_000, 9), None).unwrap();
        let b = run_simulation(&sys, &p, &Greedy, &cfg(5_000, 9), None).unwrap();
        assert_eq!(a, b);
        assert!(a.avg_backlog <= a.max_excursion as f64);
        assert_eq!(a.demand_trace.len(), 1 + 5_000 / 2);
    }

    #[test]
    fn rejects_short_runs() {
        let sys = single_link();
        let c = RunConfig {
            steps: 10,
            transient_discard: 10,
            seed: 0,
        };
        assert!(run_simulation(&sys, &link_params(&sys, 1.0, 0.0), &Greedy, &c, None).is_err());
    }
}
