//! Dense bounded-variable dual simplex.
//!
//! Solves `min cost·y  s.t.  A y <= b,  0 <= y <= upper` where every
//! structural variable has a finite upper bound. Because all bounds are
//! finite, the all-slack basis with each structural variable parked at the
//! bound favoured by its cost sign is dual feasible, so no phase one is
//! needed: dual simplex pivots restore primal feasibility or prove the
//! system infeasible.

const PIVOT_EPS: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct Lp {
    pub n: usize,
    /// Row-major, `rows.len() / n` rows.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal { value: f64, y: Vec<f64> },
    Infeasible,
    /// Iteration cap reached (degenerate cycling or numerical trouble).
    Stalled,
}

impl Lp {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            a: Vec::new(),
            b: Vec::new(),
            upper: vec![0.0; n],
            cost: vec![0.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn push_row(&mut self, coeffs: &[f64], rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n);
        self.a.extend_from_slice(coeffs);
        self.b.push(rhs);
    }

    pub fn solve(&self) -> LpOutcome {
        let n = self.n;
        let m = self.rows();
        let cols = n + m;
        let upper_of = |k: usize| if k < n { self.upper[k] } else { f64::INFINITY };

        let mut t = vec![0.0; m * cols];
        for i in 0..m {
            t[i * cols..i * cols + n].copy_from_slice(&self.a[i * n..(i + 1) * n]);
            t[i * cols + n + i] = 1.0;
        }
        let mut x = vec![0.0; cols];
        let mut at_upper = vec![false; cols];
        let mut d = vec![0.0; cols];
        for j in 0..n {
            d[j] = self.cost[j];
            if self.cost[j] < 0.0 && self.upper[j] > 0.0 {
                x[j] = self.upper[j];
                at_upper[j] = true;
            }
        }
        let mut basis: Vec<usize> = (n..cols).collect();
        let mut is_basic = vec![false; cols];
        for &k in &basis {
            is_basic[k] = true;
        }
        for i in 0..m {
            let mut s = self.b[i];
            for j in 0..n {
                s -= self.a[i * n + j] * x[j];
            }
            x[n + i] = s;
        }

        let max_iter = 50 * (cols + 10);
        for _ in 0..max_iter {
            // Leaving row: largest bound violation among basic variables.
            let mut leave = None;
            let mut worst = PRIMAL_TOL;
            for (r, &bv) in basis.iter().enumerate() {
                let v = x[bv];
                let viol = (-v).max(v - upper_of(bv));
                if viol > worst {
                    worst = viol;
                    leave = Some(r);
                }
            }
            let Some(r) = leave else {
                let value = (0..n).map(|j| self.cost[j] * x[j]).sum();
                x.truncate(n);
                return LpOutcome::Optimal { value, y: x };
            };
            let bv = basis[r];
            let below = x[bv] < 0.0;
            let row = &t[r * cols..(r + 1) * cols];

            let mut enter = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0f64;
            for k in 0..cols {
                if is_basic[k] || upper_of(k) <= 0.0 {
                    continue;
                }
                let alpha = row[k];
                if alpha.abs() <= PIVOT_EPS {
                    continue;
                }
                let eligible = if below {
                    (!at_upper[k] && alpha < 0.0) || (at_upper[k] && alpha > 0.0)
                } else {
                    (!at_upper[k] && alpha > 0.0) || (at_upper[k] && alpha < 0.0)
                };
                if !eligible {
                    continue;
                }
                let ratio = d[k].abs() / alpha.abs();
                if ratio < best_ratio - 1e-12
                    || (ratio <= best_ratio + 1e-12 && alpha.abs() > best_alpha)
                {
                    best_ratio = ratio;
                    best_alpha = alpha.abs();
                    enter = Some(k);
                }
            }
            let Some(k) = enter else {
                return LpOutcome::Infeasible;
            };

            let target = if below { 0.0 } else { upper_of(bv) };
            let alpha = row[k];
            let step = (x[bv] - target) / alpha;
            x[k] += step;
            for (i, &b) in basis.iter().enumerate() {
                x[b] -= t[i * cols + k] * step;
            }
            x[bv] = target;
            at_upper[bv] = !below;
            at_upper[k] = false;

            // Pivot on (r, k).
            let inv = 1.0 / alpha;
            for v in &mut t[r * cols..(r + 1) * cols] {
                *v *= inv;
            }
            let (head, rest) = t.split_at_mut(r * cols);
            let (pivot_row, tail) = rest.split_at_mut(cols);
            for other in head.chunks_mut(cols).chain(tail.chunks_mut(cols)) {
                let f = other[k];
                if f != 0.0 {
                    for (o, p) in other.iter_mut().zip(pivot_row.iter()) {
                        *o -= f * p;
                    }
                    other[k] = 0.0;
                }
            }
            let f = d[k];
            if f != 0.0 {
                for (dv, p) in d.iter_mut().zip(pivot_row.iter()) {
                    *dv -= f * p;
                }
                d[k] = 0.0;
            }
            is_basic[bv] = false;
            is_basic[k] = true;
            basis[r] = k;
        }
        LpOutcome::Stalled
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &Lp) -> (f64, Vec<f64>) {
        match lp.solve() {
            LpOutcome::Optimal { value, y } => (value, y),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn unconstrained_box_takes_negative_costs_to_upper() {
        let mut lp = Lp::new(2);
        lp.upper = vec![3.0, 4.0];
        lp.cost = vec![-1.0, 2.0];
        let (v, y) = optimal(&lp);
        assert_eq!(v, -3.0);
        assert_eq!(y, vec![3.0, 0.0]);
    }

    #[test]
    fn knapsack_relaxation() {
        // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3, y <= 5
        let mut lp = Lp::new(2);
        lp.upper = vec![3.0, 5.0];
        lp.cost = vec![-3.0, -2.0];
        lp.push_row(&[1.0, 1.0], 4.0);
        lp.push_row(&[1.0, 3.0], 6.0);
        let (v, y) = optimal(&lp);
        assert!((v + 11.0).abs() < 1e-9, "{v}");
        assert!((y[0] - 3.0).abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        // y >= 2 written as -y <= -2, with y <= 1.
        let mut lp = Lp::new(1);
        lp.upper = vec![1.0];
        lp.cost = vec![1.0];
        lp.push_row(&[-1.0], -2.0);
        assert!(matches!(lp.solve(), LpOutcome::Infeasible));
    }

    #[test]
    fn negative_rhs_recovered_by_dual_pivots() {
        // min x + y  s.t. x + y >= 1.5 (as -x - y <= -1.5), x - y <= 0.5
        let mut lp = Lp::new(2);
        lp.upper = vec![2.0, 2.0];
        lp.cost = vec![1.0, 1.0];
        lp.push_row(&[-1.0, -1.0], -1.5);
        lp.push_row(&[1.0, -1.0], 0.5);
        let (v, _) = optimal(&lp);
        assert!((v - 1.5).abs() < 1e-9);
    }
}
