//! Exact solver for the small integer programs issued by the schedulers.
//!
//! Instances have the shape
//!
//! ```text
//! minimize   (c·r + ½ Σ_j q_j r_j²) / denom
//! subject to A r <= b,  0 <= r <= ub,  r integer
//! ```
//!
//! with `q_j >= 0`. Among global minimizers the solver returns the one with
//! the fewest "swap" units (the first `n_swaps` variables), then the
//! lexicographically smallest vector. Objective coefficients are scaled
//! integers so that optimality and tie-breaking are decided exactly; the LP
//! relaxation used for bounding runs in floating point but only ever prunes
//! with a safety margin.

mod dump;
mod lp;
mod search;

use std::time::Duration;

use thiserror::Error;

pub use dump::{parse_dump, write_dump, DumpError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// One integer program. See the crate docs for the objective convention.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IpInstance {
    /// Linear objective numerators.
    pub c: Vec<i64>,
    /// Diagonal quadratic numerators; the objective carries `½ q_j r_j²`.
    pub qdiag: Vec<i64>,
    /// Common positive denominator of `c` and `qdiag`.
    pub denom: i64,
    /// Constraint rows, each of length `dim`.
    pub a: Vec<Vec<i64>>,
    /// Right-hand sides. Since `A` and `r` are integral, a real bound `β`
    /// is equivalent to `⌊β⌋`; see [`floor_rhs`].
    pub b: Vec<i64>,
    pub ub: Vec<i64>,
    /// Number of leading variables that count as swaps for tie-breaking.
    pub n_swaps: usize,
}

/// Converts a real right-hand side to the equivalent integer bound for an
/// integral row. A small tolerance absorbs float noise such as
/// `0.9 * 10.0 + 1.0 == 9.999999999999998`.
pub fn floor_rhs(value: f64) -> i64 {
    (value + 1e-9).floor() as i64
}

impl IpInstance {
    /// Linear instance without constraints; add rows with [`IpInstance::push_row`].
    pub fn linear(c: Vec<i64>, denom: i64, ub: Vec<i64>, n_swaps: usize) -> Self {
        let dim = c.len();
        Self {
            c,
            qdiag: vec![0; dim],
            denom,
            a: Vec::new(),
            b: Vec::new(),
            ub,
            n_swaps,
        }
    }

    pub fn push_row(&mut self, row: Vec<i64>, rhs: i64) {
        self.a.push(row);
        self.b.push(rhs);
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let d = self.dim();
        if self.qdiag.len() != d || self.ub.len() != d {
            return Err(SolveError::Dimension(format!(
                "c has {d} entries, qdiag {}, ub {}",
                self.qdiag.len(),
                self.ub.len()
            )));
        }
        if self.a.len() != self.b.len() {
            return Err(SolveError::Dimension(format!(
                "{} rows but {} right-hand sides",
                self.a.len(),
                self.b.len()
            )));
        }
        if let Some(i) = self.a.iter().position(|row| row.len() != d) {
            return Err(SolveError::Dimension(format!("row {i} does not have {d} entries")));
        }
        if self.n_swaps > d {
            return Err(SolveError::Dimension(format!("n_swaps {} exceeds dim {d}", self.n_swaps)));
        }
        if self.denom <= 0 {
            return Err(SolveError::Invalid("denominator must be positive".into()));
        }
        if self.ub.iter().any(|&u| u < 0) {
            return Err(SolveError::Invalid("negative upper bound".into()));
        }
        if self.qdiag.iter().any(|&q| q < 0) {
            return Err(SolveError::Invalid("negative quadratic coefficient".into()));
        }
        Ok(())
    }

    /// Twice the objective numerator: `2 c·r + Σ q r²`.
    pub fn objective_numerator2(&self, r: &[i64]) -> i128 {
        r.iter()
            .zip(self.c.iter().zip(&self.qdiag))
            .map(|(&x, (&c, &q))| {
                let x = x as i128;
                2 * c as i128 * x + q as i128 * x * x
            })
            .sum()
    }

    pub fn objective(&self, r: &[i64]) -> f64 {
        self.objective_numerator2(r) as f64 / (2.0 * self.denom as f64)
    }

    /// Feasibility against `A r <= max(b, 0)` and `0 <= r <= ub`.
    pub fn is_feasible(&self, r: &[i64]) -> bool {
        if r.len() != self.dim() {
            return false;
        }
        if r.iter().zip(&self.ub).any(|(&x, &u)| x < 0 || x > u) {
            return false;
        }
        self.a.iter().zip(&self.b).all(|(row, &b)| {
            let lhs: i128 = row.iter().zip(r).map(|(&a, &x)| a as i128 * x as i128).sum();
            lhs <= b.max(0) as i128
        })
    }

    pub fn swap_count(&self, r: &[i64]) -> i64 {
        r[..self.n_swaps].iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Maximum number of LP relaxations (search nodes) before giving up.
    pub max_nodes: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_nodes: 1_000_000,
            time_limit: Some(Duration::from_millis(100)),
        }
    }
}

impl SolveOptions {
    pub fn unlimited() -> Self {
        Self {
            max_nodes: u64::MAX,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Budget exhausted; the returned vector is the best found so far.
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub r: Vec<i64>,
    pub objective: f64,
    /// `2 · denom · objective`, exact.
    pub objective_numerator2: i128,
    pub swaps: i64,
    pub status: SolveStatus,
    pub nodes: u64,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves `instance` exactly within the given budget.
pub fn solve(instance: &IpInstance, options: &SolveOptions) -> Result<Solution, SolveError> {
    instance.validate()?;
    let outcome = search::Search::new(instance, options).run()?;
    let r = outcome.r;
    debug_assert!(instance.is_feasible(&r));
    Ok(Solution {
        objective: instance.objective(&r),
        objective_numerator2: instance.objective_numerator2(&r),
        swaps: instance.swap_count(&r),
        r,
        status: outcome.status,
        nodes: outcome.nodes,
    })
}
