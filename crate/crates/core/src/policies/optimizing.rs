use qns_ipsolver::{floor_rhs, solve, IpInstance, SolveOptions};
use tracing::warn;

use crate::netmodel::TransitionSystem;
use crate::stochproc::SimRng;

use super::greedy::{exact_view, greedy_decision};
use super::info::{effective_rhs, owns_column, Bounds};
use super::{Decision, DecisionContext, InfoLevel, PolicyError, SchedulingPolicy};

/// Denominator used when demand estimates are fractional.
const FRACTIONAL_SCALE: i64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Max-Weight: `min w·r`.
    Linear,
    /// `min w·r + ½ Σ r_cons²`.
    Quadratic,
}

/// Max-Weight and quadratic policies at any information level.
#[derive(Debug, Clone)]
pub struct Optimizing {
    objective: Objective,
    info: InfoLevel,
    options: SolveOptions,
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// Integer program for one set of bounds: weights `-d̂` on consumption,
/// `-M̃ r <= ebit bound`, `r_cons <= demand bound`, every variable capped by
/// the total available ebits.
pub fn build_instance(system: &TransitionSystem, bounds: &Bounds, objective: Objective) -> IpInstance {
    let nt = system.n_transitions();
    let nq = system.n_queues();
    let denom = if bounds.demand.iter().all(|&x| is_integral(x)) {
        1
    } else {
        FRACTIONAL_SCALE
    };
    let b: Vec<i64> = bounds.ebit.iter().map(|&x| floor_rhs(x)).collect();
    let total: i64 = b.iter().filter(|&&x| x > 0).sum();
    let mut c = vec![0i64; nt + nq];
    let mut qdiag = vec![0i64; nt + nq];
    let mut ub = vec![total; nt + nq];
    for e in 0..nq {
        c[nt + e] = -(bounds.demand[e] * denom as f64).round() as i64;
        if objective == Objective::Quadratic {
            qdiag[nt + e] = denom;
        }
        ub[nt + e] = total.min(floor_rhs(bounds.demand[e]).max(0));
    }
    let mut rows = vec![vec![0i64; nt + nq]; nq];
    for (t, tr) in system.transitions().iter().enumerate() {
        rows[tr.parents[0]][t] += 1;
        rows[tr.parents[1]][t] += 1;
        rows[tr.child][t] -= 1;
    }
    for (e, row) in rows.iter_mut().enumerate() {
        row[nt + e] = 1;
    }
    IpInstance {
        c,
        qdiag,
        denom,
        a: rows,
        b,
        ub,
        n_swaps: nt,
    }
}

impl Optimizing {
    pub fn new(objective: Objective, info: InfoLevel, options: SolveOptions) -> Self {
        Self {
            objective,
            info,
            options,
        }
    }

    /// Optimal vector, or `None` when the budget ran out.
    fn solve(&self, ctx: &DecisionContext<'_>, inst: IpInstance) -> Result<Option<Vec<i64>>, PolicyError> {
        let fp = ctx.system.fingerprint();
        if let Some(cache) = ctx.cache {
            if let Some(r) = cache.get(fp, &inst) {
                return Ok(Some(r));
            }
        }
        let sol = solve(&inst, &self.options)?;
        if !sol.is_optimal() {
            return Ok(None);
        }
        if let Some(cache) = ctx.cache {
            cache.insert(fp, &inst, &sol.r);
        }
        Ok(Some(sol.r))
    }

    fn fallback(&self, ctx: &DecisionContext<'_>, rng: &mut SimRng) -> Decision {
        warn!(policy = %self.id(), t = ctx.state.t, "solver budget exhausted, using greedy decision");
        let (avail, demand, service) = exact_view(ctx);
        Decision {
            r: greedy_decision(ctx.system, &avail, &demand, &service, None, rng),
            fell_back: true,
        }
    }
}

impl SchedulingPolicy for Optimizing {
    fn id(&self) -> String {
        let family = match self.objective {
            Objective::Linear => "maxweight",
            Objective::Quadratic => "quadratic",
        };
        format!("{family}-{}", self.info)
    }

    fn decide(&self, ctx: &DecisionContext<'_>, rng: &mut SimRng) -> Result<Decision, PolicyError> {
        let sys = ctx.system;
        let to_u64 = |r: Vec<i64>| r.into_iter().map(|x| x as u64).collect::<Vec<_>>();
        match self.info {
            InfoLevel::Fi | InfoLevel::Pi => {
                let bounds = effective_rhs(ctx, self.info == InfoLevel::Fi, None);
                match self.solve(ctx, build_instance(sys, &bounds, self.objective))? {
                    Some(r) => Ok(Decision {
                        r: to_u64(r),
                        fell_back: false,
                    }),
                    None => Ok(self.fallback(ctx, rng)),
                }
            }
            InfoLevel::Li => {
                let mut r = vec![0u64; sys.dim()];
                for node in 0..sys.node_names().len() {
                    let owned: Vec<usize> = (0..sys.dim()).filter(|&c| owns_column(sys, c, node)).collect();
                    if owned.is_empty() {
                        continue;
                    }
                    let bounds = effective_rhs(ctx, false, Some(node));
                    let Some(local) = self.solve(ctx, build_instance(sys, &bounds, self.objective))? else {
                        return Ok(self.fallback(ctx, rng));
                    };
                    for c in owned {
                        r[c] = local[c] as u64;
                    }
                }
                Ok(Decision { r, fell_back: false })
            }
        }
    }
}
