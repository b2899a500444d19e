use rand::seq::SliceRandom;

use crate::netmodel::{Op, TransitionSystem};
use crate::stochproc::SimRng;

/// Outcome of pushing a decision through the conflict engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    /// Executed decision; always feasible.
    pub r: Vec<u64>,
    /// Units per column that could not execute.
    pub dropped: Vec<u64>,
    /// Consumption units executed.
    pub served: u64,
}

/// Executes `r` unit by unit in ascending rank order, shuffling units within
/// a rank. A swap needs one ebit in each parent; a consumption needs one ebit
/// and one pending demand. Units that cannot execute are dropped.
///
/// `groups` is [`TransitionSystem::columns_by_rank`], hoisted out of the step loop.
pub fn apply_decision(
    system: &TransitionSystem,
    groups: &[(u32, Vec<usize>)],
    avail: &[u64],
    demand: &[u64],
    r: &[u64],
    rng: &mut SimRng,
) -> Applied {
    let dim = system.dim();
    let mut q = avail.to_vec();
    let mut d = demand.to_vec();
    let mut out = Applied {
        r: vec![0; dim],
        dropped: vec![0; dim],
        served: 0,
    };
    let mut units = Vec::new();
    for (_, cols) in groups {
        units.clear();
        for &c in cols {
            units.extend(std::iter::repeat_n(c, r[c] as usize));
        }
        units.shuffle(rng);
        for &c in &units {
            let ok = match system.op(c) {
                Op::Swap(t) => {
                    let tr = &system.transitions()[t];
                    let [p1, p2] = tr.parents;
                    if q[p1] >= 1 && q[p2] >= 1 {
                        q[p1] -= 1;
                        q[p2] -= 1;
                        q[tr.child] += 1;
                        true
                    } else {
                        false
                    }
                }
                Op::Consume(e) => {
                    if q[e] >= 1 && d[e] >= 1 {
                        q[e] -= 1;
                        d[e] -= 1;
                        out.served += 1;
                        true
                    } else {
                        false
                    }
                }
            };
            if ok {
                out.r[c] += 1;
            } else {
                out.dropped[c] += 1;
            }
        }
    }
    out
}
