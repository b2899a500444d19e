//! Two-phase branch and bound.
//!
//! Every candidate is ranked by an exact integer key
//! `(2 c·r + Σ q r²) · S + swaps(r)` with `S` larger than any feasible swap
//! count, so comparing keys compares the objective first and the swap count
//! second. Phase one finds the optimal key with depth-first branching on
//! fractional LP values. Phase two walks variables in index order, fixing
//! each to the smallest value that still admits a completion at the optimal
//! key, which yields the lexicographically smallest minimizer.
//!
//! Quadratic terms enter the relaxation as unit segments of increasing
//! slope (the piecewise-linear interpolation of a convex function through
//! its integer points) with one tail segment whose slope underestimates the
//! rest, so the LP value is always a valid lower bound on the key.

use std::time::Instant;

use crate::lp::{Lp, LpOutcome};
use crate::{IpInstance, SolveError, SolveOptions, SolveStatus};

/// Exact unit segments per quadratic variable before the tail segment.
const SEGMENT_CAP: i64 = 16;
const INTEGRALITY_TOL: f64 = 1e-6;

pub(crate) struct Outcome {
    pub r: Vec<i64>,
    pub status: SolveStatus,
    pub nodes: u64,
}

/// Presolved problem over the variables that can be nonzero.
struct Reduced {
    /// Original index of each reduced variable.
    vars: Vec<usize>,
    c: Vec<i64>,
    q: Vec<i64>,
    swap: Vec<bool>,
    ub: Vec<i64>,
    rows: Vec<Vec<i64>>,
    b: Vec<i64>,
    /// Key multiplier, strictly larger than any feasible swap count.
    s: i128,
}

impl Reduced {
    fn key(&self, r: &[i64]) -> i128 {
        let mut obj2 = 0i128;
        let mut swaps = 0i128;
        for j in 0..r.len() {
            let x = r[j] as i128;
            obj2 += 2 * self.c[j] as i128 * x + self.q[j] as i128 * x * x;
            if self.swap[j] {
                swaps += x;
            }
        }
        obj2 * self.s + swaps
    }

    fn feasible(&self, r: &[i64]) -> bool {
        self.rows.iter().zip(&self.b).all(|(row, &b)| {
            let lhs: i128 = row.iter().zip(r).map(|(&a, &x)| a as i128 * x as i128).sum();
            lhs <= b as i128
        })
    }

    /// Key contribution of moving variable `j` from `x` to `x + 1`.
    fn slope(&self, j: usize, x: i64) -> f64 {
        let obj = 2.0 * self.c[j] as f64 + self.q[j] as f64 * (2.0 * x as f64 + 1.0);
        obj * self.s as f64 + if self.swap[j] { 1.0 } else { 0.0 }
    }
}

enum Goal {
    Key,
    MinVar(usize),
    MaxVar(usize),
}

struct Relaxation {
    lp: Lp,
    /// Reduced variable owning each LP column.
    owner: Vec<usize>,
    /// Key value at the node's lower bounds.
    constant: f64,
    /// Factor applied to key-cost columns before handing them to the LP.
    scale: f64,
}

enum Bound {
    Infeasible,
    /// LP could not be solved reliably; treat the node as unbounded.
    Unknown,
    Value { value: f64, r: Vec<f64> },
}

pub(crate) struct Search<'a> {
    inst: &'a IpInstance,
    opts: &'a SolveOptions,
    start: Instant,
    nodes: u64,
    timed_out: bool,
}

impl<'a> Search<'a> {
    pub fn new(inst: &'a IpInstance, opts: &'a SolveOptions) -> Self {
        Self {
            inst,
            opts,
            start: Instant::now(),
            nodes: 0,
            timed_out: false,
        }
    }

    pub fn run(mut self) -> Result<Outcome, SolveError> {
        let red = self.presolve();
        let d = self.inst.dim();
        let mut full = vec![0i64; d];
        let finish = |red: &Reduced, r: &[i64], full: &mut Vec<i64>| {
            for (k, &j) in red.vars.iter().enumerate() {
                full[j] = r[k];
            }
        };

        // With no negative cost anywhere, zero is optimal and lexicographically first.
        if red.vars.is_empty() || red.c.iter().all(|&c| c >= 0) {
            return Ok(Outcome {
                r: full,
                status: SolveStatus::Optimal,
                nodes: 0,
            });
        }

        let (incumbent, best_key) = self.phase_one(&red);
        if self.timed_out {
            finish(&red, &incumbent, &mut full);
            return Ok(Outcome {
                r: full,
                status: SolveStatus::Timeout,
                nodes: self.nodes,
            });
        }
        let lex = self.phase_two(&red, best_key);
        let (r, status) = match lex {
            Some(r) if !self.timed_out => (r, SolveStatus::Optimal),
            _ => (incumbent, SolveStatus::Timeout),
        };
        finish(&red, &r, &mut full);
        Ok(Outcome {
            r: full,
            status,
            nodes: self.nodes,
        })
    }

    fn presolve(&self) -> Reduced {
        let inst = self.inst;
        let d = inst.dim();
        let mut ub = inst.ub.clone();
        let b: Vec<i64> = inst.b.iter().map(|&b| b.max(0)).collect();
        // Row singletons with a positive coefficient are plain bounds.
        for (row, &rhs) in inst.a.iter().zip(&b) {
            let mut nz = row.iter().enumerate().filter(|(j, &a)| a != 0 && ub[*j] > 0);
            if let (Some((j, &a)), None) = (nz.next(), nz.next()) {
                if a > 0 {
                    ub[j] = ub[j].min(rhs / a);
                }
            }
        }
        let vars: Vec<usize> = (0..d).filter(|&j| ub[j] > 0).collect();
        let mut rows = Vec::new();
        let mut rb = Vec::new();
        for (row, &rhs) in inst.a.iter().zip(&b) {
            let reduced: Vec<i64> = vars.iter().map(|&j| row[j]).collect();
            // Rows with no positive coefficient hold for every r >= 0.
            if reduced.iter().any(|&a| a > 0) {
                rows.push(reduced);
                rb.push(rhs);
            }
        }
        let swap: Vec<bool> = vars.iter().map(|&j| j < inst.n_swaps).collect();
        let ubr: Vec<i64> = vars.iter().map(|&j| ub[j]).collect();
        let s = 1 + swap
            .iter()
            .zip(&ubr)
            .filter(|(s, _)| **s)
            .map(|(_, &u)| u as i128)
            .sum::<i128>();
        Reduced {
            c: vars.iter().map(|&j| inst.c[j]).collect(),
            q: vars.iter().map(|&j| inst.qdiag[j]).collect(),
            vars,
            swap,
            ub: ubr,
            rows,
            b: rb,
            s,
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        if self.nodes >= self.opts.max_nodes {
            self.timed_out = true;
        } else if let Some(limit) = self.opts.time_limit {
            if self.nodes % 16 == 0 && self.start.elapsed() > limit {
                self.timed_out = true;
            }
        }
        self.timed_out
    }

    fn relaxation(&self, red: &Reduced, lo: &[i64], hi: &[i64], goal: &Goal, cut: Option<i128>) -> Relaxation {
        let n_red = lo.len();
        let mut owner = Vec::new();
        let mut width = Vec::new();
        let mut key_cost = Vec::new();
        let constant = red.key(lo) as f64;
        for j in 0..n_red {
            let span = hi[j] - lo[j];
            if span <= 0 {
                continue;
            }
            if red.q[j] == 0 {
                owner.push(j);
                width.push(span as f64);
                key_cost.push(red.slope(j, lo[j]));
            } else {
                let exact = span.min(SEGMENT_CAP);
                for k in 0..exact {
                    owner.push(j);
                    width.push(1.0);
                    key_cost.push(red.slope(j, lo[j] + k));
                }
                if span > exact {
                    owner.push(j);
                    width.push((span - exact) as f64);
                    key_cost.push(red.slope(j, lo[j] + exact));
                }
            }
        }
        let n = owner.len();
        let scale = key_cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let mut lp = Lp::new(n);
        lp.upper = width;
        lp.cost = match goal {
            Goal::Key => key_cost.iter().map(|c| c / scale).collect(),
            Goal::MinVar(v) => owner.iter().map(|&j| if j == *v { 1.0 } else { 0.0 }).collect(),
            Goal::MaxVar(v) => owner.iter().map(|&j| if j == *v { -1.0 } else { 0.0 }).collect(),
        };
        let mut coeffs = vec![0.0; n];
        for (row, &rhs) in red.rows.iter().zip(&red.b) {
            let mut rest = rhs as i128;
            for j in 0..n_red {
                rest -= row[j] as i128 * lo[j] as i128;
            }
            let mut any = false;
            for (col, &j) in owner.iter().enumerate() {
                coeffs[col] = row[j] as f64;
                any |= row[j] != 0;
            }
            if !any && rest >= 0 {
                continue;
            }
            lp.push_row(&coeffs, rest as f64);
        }
        if let Some(limit) = cut {
            // key(lo) + Σ key_cost·y <= limit, with half a unit of slack since keys are integral.
            let rhs = (limit as f64 + 0.5 - constant) / scale;
            let row: Vec<f64> = key_cost.iter().map(|c| c / scale).collect();
            lp.push_row(&row, rhs);
        }
        Relaxation {
            lp,
            owner,
            constant,
            scale,
        }
    }

    fn bound(&mut self, red: &Reduced, lo: &[i64], hi: &[i64], goal: Goal, cut: Option<i128>) -> Bound {
        self.nodes += 1;
        let rel = self.relaxation(red, lo, hi, &goal, cut);
        match rel.lp.solve() {
            LpOutcome::Infeasible => Bound::Infeasible,
            LpOutcome::Stalled => Bound::Unknown,
            LpOutcome::Optimal { value, y } => {
                let mut r: Vec<f64> = lo.iter().map(|&v| v as f64).collect();
                for (col, &j) in rel.owner.iter().enumerate() {
                    r[j] += y[col];
                }
                let value = match goal {
                    Goal::Key => rel.constant + value * rel.scale,
                    Goal::MinVar(_) | Goal::MaxVar(_) => value,
                };
                Bound::Value { value, r }
            }
        }
    }

    /// Depth-first branch and bound for the optimal key.
    fn phase_one(&mut self, red: &Reduced) -> (Vec<i64>, i128) {
        let d = red.vars.len();
        let mut incumbent = vec![0i64; d];
        let mut best = red.key(&incumbent);
        let mut stack = vec![(vec![0i64; d], red.ub.clone())];
        while let Some((lo, hi)) = stack.pop() {
            if self.out_of_budget() {
                break;
            }
            if lo == hi {
                if red.feasible(&lo) {
                    let k = red.key(&lo);
                    if k < best {
                        best = k;
                        incumbent = lo;
                    }
                }
                continue;
            }
            let (value, r) = match self.bound(red, &lo, &hi, Goal::Key, None) {
                Bound::Infeasible => continue,
                Bound::Unknown => {
                    let j = (0..d).find(|&j| lo[j] < hi[j]).expect("free variable");
                    let mid = lo[j] + (hi[j] - lo[j]) / 2;
                    push_split(&mut stack, &lo, &hi, j, mid, false);
                    continue;
                }
                Bound::Value { value, r } => (value, r),
            };
            // Keys are integers: a node can only improve if its bound is at most best - 1.
            if value > (best - 1) as f64 + prune_tol(value) {
                continue;
            }
            let frac = (0..d)
                .filter(|&j| (r[j] - r[j].round()).abs() > INTEGRALITY_TOL)
                .max_by(|&a, &b| {
                    let fa = (r[a] - r[a].floor() - 0.5).abs();
                    let fb = (r[b] - r[b].floor() - 0.5).abs();
                    fb.partial_cmp(&fa).unwrap().then(b.cmp(&a))
                });
            match frac {
                Some(j) => {
                    let v = r[j].floor() as i64;
                    let up_first = r[j] - r[j].floor() > 0.5;
                    push_split(&mut stack, &lo, &hi, j, v, up_first);
                }
                None => {
                    let ri: Vec<i64> = r.iter().map(|x| x.round() as i64).collect();
                    if red.feasible(&ri) {
                        let k = red.key(&ri);
                        if k < best {
                            best = k;
                            incumbent = ri.clone();
                        }
                        // Exact when the relaxation was tight at this point.
                        if (k as f64) <= value + prune_tol(value) + 0.5 {
                            continue;
                        }
                    }
                    // Relaxation loose (tail segment) or rounding trouble: split the widest domain.
                    let j = (0..d)
                        .filter(|&j| lo[j] < hi[j])
                        .max_by_key(|&j| (hi[j] - lo[j], std::cmp::Reverse(j)))
                        .expect("free variable");
                    let v = ri[j].clamp(lo[j], hi[j] - 1);
                    push_split(&mut stack, &lo, &hi, j, v, false);
                }
            }
        }
        (incumbent, best)
    }

    /// Lexicographically smallest vector attaining `target`.
    fn phase_two(&mut self, red: &Reduced, target: i128) -> Option<Vec<i64>> {
        let mut lo = vec![0i64; red.vars.len()];
        let mut hi = red.ub.clone();
        if self.lex_descend(red, target, 0, &mut lo, &mut hi) {
            Some(lo)
        } else {
            None
        }
    }

    fn lex_descend(&mut self, red: &Reduced, target: i128, j: usize, lo: &mut Vec<i64>, hi: &mut Vec<i64>) -> bool {
        let d = lo.len();
        if j == d {
            return red.feasible(lo) && red.key(lo) == target;
        }
        if self.out_of_budget() {
            return false;
        }
        let (orig_lo, orig_hi) = (lo[j], hi[j]);
        let first = match self.bound(red, lo, hi, Goal::MinVar(j), Some(target)) {
            Bound::Infeasible => return false,
            Bound::Unknown => orig_lo,
            Bound::Value { value, .. } => ((value - INTEGRALITY_TOL).ceil() as i64).max(orig_lo),
        };
        let mut last = orig_hi;
        let mut last_known = false;
        let mut v = first;
        while v <= last {
            lo[j] = v;
            hi[j] = v;
            if self.lex_descend(red, target, j + 1, lo, hi) {
                return true;
            }
            if self.timed_out {
                break;
            }
            if !last_known {
                last_known = true;
                lo[j] = orig_lo;
                hi[j] = orig_hi;
                match self.bound(red, lo, hi, Goal::MaxVar(j), Some(target)) {
                    Bound::Infeasible => break,
                    Bound::Unknown => {}
                    Bound::Value { value, .. } => {
                        last = last.min(((-value) + INTEGRALITY_TOL).floor() as i64);
                    }
                }
            }
            v += 1;
        }
        lo[j] = orig_lo;
        hi[j] = orig_hi;
        false
    }
}

fn prune_tol(value: f64) -> f64 {
    1e-7 + 1e-11 * value.abs()
}

/// Pushes children `x_j <= v` and `x_j >= v + 1`; the one pushed last is explored first.
fn push_split(stack: &mut Vec<(Vec<i64>, Vec<i64>)>, lo: &[i64], hi: &[i64], j: usize, v: i64, up_first: bool) {
    let mut down = (lo.to_vec(), hi.to_vec());
    down.1[j] = v;
    let mut up = (lo.to_vec(), hi.to_vec());
    up.0[j] = v + 1;
    if up_first {
        stack.push(down);
        stack.push(up);
    } else {
        stack.push(up);
        stack.push(down);
    }
}
