use rand::Rng;

use crate::netmodel::TransitionSystem;
use crate::stochproc::SimRng;

use super::{Decision, DecisionContext, PolicyError, SchedulingPolicy};

/// Serves whatever demand can be served right away, then swaps at random
/// until no transition has both parents available.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

/// Greedy decision from exact availability `avail` and pending demand.
///
/// `service[e]` marks queues whose demand may be served; `allowed[t]`
/// restricts which transitions may be picked.
pub fn greedy_decision(
    system: &TransitionSystem,
    avail: &[u64],
    demand: &[u64],
    service: &[bool],
    allowed: Option<&[bool]>,
    rng: &mut SimRng,
) -> Vec<u64> {
    let nt = system.n_transitions();
    let mut r = vec![0u64; system.dim()];
    let mut left = avail.to_vec();
    for e in 0..system.n_queues() {
        if service[e] {
            let c = left[e].min(demand[e]);
            r[nt + e] = c;
            left[e] -= c;
        }
    }
    let transitions = system.transitions();
    let candidates: Vec<usize> = (0..nt).filter(|&t| allowed.is_none_or(|a| a[t])).collect();
    let mut feasible = Vec::with_capacity(candidates.len());
    loop {
        feasible.clear();
        feasible.extend(
            candidates
                .iter()
                .copied()
                .filter(|&t| transitions[t].parents.iter().all(|&p| left[p] >= 1)),
        );
        if feasible.is_empty() {
            return r;
        }
        let t = feasible[rng.random_range(0..feasible.len())];
        let tr = transitions[t];
        left[tr.parents[0]] -= 1;
        left[tr.parents[1]] -= 1;
        left[tr.child] += 1;
        r[t] += 1;
    }
}

pub(crate) fn exact_view(ctx: &DecisionContext<'_>) -> (Vec<u64>, Vec<u64>, Vec<bool>) {
    let n = ctx.system.n_queues();
    let avail = (0..n).map(|e| ctx.state.q[e] + ctx.real.a[e] - ctx.real.l[e]).collect();
    let demand = (0..n).map(|e| ctx.state.d[e] + ctx.real.b[e]).collect();
    let service = (0..n).map(|e| ctx.params.is_service_queue(e)).collect();
    (avail, demand, service)
}

impl SchedulingPolicy for Greedy {
    fn id(&self) -> String {
        "greedy".into()
    }

    fn decide(&self, ctx: &DecisionContext<'_>, rng: &mut SimRng) -> Result<Decision, PolicyError> {
        let (avail, demand, service) = exact_view(ctx);
        Ok(Decision {
            r: greedy_decision(ctx.system, &avail, &demand, &service, None, rng),
            fell_back: false,
        })
    }
}
