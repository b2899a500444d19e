use crate::netmodel::{NodeId, Op, TransitionSystem};

use super::DecisionContext;

/// Right-hand sides of the feasibility constraints as a policy sees them.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// Ebits believed available per queue this step.
    pub ebit: Vec<f64>,
    /// Demands believed pending per queue this step.
    pub demand: Vec<f64>,
}

/// Bounds under full information (`node == None` with `exact == true`),
/// partial information (`exact == false`), or local information at `node`
/// (exact on queues touching `node`, expected elsewhere).
pub fn effective_rhs(ctx: &DecisionContext<'_>, exact: bool, node: Option<NodeId>) -> Bounds {
    let (sys, p, s, real) = (ctx.system, ctx.params, ctx.state, ctx.real);
    let n = sys.n_queues();
    let mut ebit = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    for e in 0..n {
        let sees_exact = match node {
            Some(v) => sys.queues()[e].touches(v),
            None => exact,
        };
        if sees_exact {
            ebit.push((s.q[e] + real.a[e] - real.l[e]) as f64);
            demand.push((s.d[e] + real.b[e]) as f64);
        } else {
            ebit.push(p.eta * s.q[e] as f64 + p.arrival_mean(e, s.t));
            demand.push(s.d[e] as f64 + p.demand_mean(e));
        }
    }
    Bounds { ebit, demand }
}

/// Whether `node` executes decision column `col`: swaps belong to their
/// middle node, consumption to the queue's smaller endpoint.
pub fn owns_column(system: &TransitionSystem, col: usize, node: NodeId) -> bool {
    match system.op(col) {
        Op::Swap(t) => system.transitions()[t].j == node,
        Op::Consume(e) => system.queues()[e].u == node,
    }
}
