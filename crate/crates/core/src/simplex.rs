//! Small dense two-phase simplex solver.
//!
//! Solves `minimize c·x  s.t.  A x = b, x ≥ 0` on a full tableau. Pivoting
//! follows Bland's rule (lowest eligible index enters, ties in the ratio test
//! go to the lowest basic index), so the method terminates without cycling and
//! is fully deterministic. Intended for the handful of constraints and at most
//! a few thousand columns that arise from activity-state schedules.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible { infeasibility: f64 },
    Unbounded,
}

struct Tableau {
    /// Constraint rows; the last entry of every row is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations for `cost` over the columns accepted by
    /// `allowed`. Returns `false` when the objective is unbounded below.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: impl Fn(usize) -> bool,
        tol: f64,
    ) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let mut entering = None;
            for j in 0..self.width {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j]
                    - self
                        .rows
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| cost[b] * row[j])
                        .sum::<f64>();
                if reduced < -tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(true);
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - tol
                            || (ratio <= lratio + tol && self.basis[r] < self.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, col);
        }
        Err(Error::LpFailure(format!(
            "pivot limit of {MAX_PIVOTS} reached"
        )))
    }
}

/// Minimizes `cost·x` subject to `a x = b`, `x ≥ 0`.
///
/// `a` is given row-major, one row per equality constraint. `tol` is used for
/// optimality and feasibility decisions.
pub fn minimize(cost: &[f64], a: &[Vec<f64>], b: &[f64], tol: f64) -> Result<LpOutcome> {
    let m = a.len();
    let n = cost.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            what: "lp right-hand side",
            expected: m,
            got: b.len(),
        });
    }
    if let Some(row) = a.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "lp constraint row",
            expected: n,
            got: row.len(),
        });
    }
    if cost
        .iter()
        .chain(b)
        .chain(a.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::LpFailure("non-finite coefficient".into()));
    }

    // Columns 0..n are structural, n..n+m are artificials.
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width + 1];
        for (j, v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[n + i] = 1.0;
        t[width] = sign * bi;
        rows.push(t);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };

    let mut phase1_cost = vec![0.0; width];
    phase1_cost[n..].iter_mut().for_each(|c| *c = 1.0);
    if !tab.optimize(&phase1_cost, |_| true, tol)? {
        return Err(Error::LpFailure("phase 1 reported unbounded".into()));
    }
    let infeasibility: f64 = (0..m)
        .filter(|&r| tab.basis[r] >= n)
        .map(|r| tab.rhs(r))
        .sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    if infeasibility > tol * scale {
        return Ok(LpOutcome::Infeasible { infeasibility });
    }

    // Drive remaining (zero-level) artificials out of the basis; rows where
    // that is impossible are linearly dependent and can be dropped.
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.rows[r][j].abs() > PIVOT_EPS) {
                Some(j) => {
                    tab.pivot(r, j);
                    r += 1;
                }
                None => {
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }

    let mut phase2_cost = cost.to_vec();
    phase2_cost.resize(width, 0.0);
    if !tab.optimize(&phase2_cost, |j| j < n, tol)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for (r, &bvar) in tab.basis.iter().enumerate() {
        if bvar < n {
            x[bvar] = tab.rhs(r).max(0.0);
        }
    }
    let objective = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_textbook_problem() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let cost = [-1.0, -1.0, 0.0, 0.0];
        let a = vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]];
        let b = [4.0, 6.0];
        match minimize(&cost, &a, &b, 1e-12).unwrap() {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.6).abs() < 1e-12);
                assert!((x[1] - 1.2).abs() < 1e-12);
                assert!((objective + 2.8).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        // x + y = -1 with x, y >= 0
        let out = minimize(&[0.0, 0.0], &[vec![1.0, 1.0]], &[-1.0], 1e-12).unwrap();
        assert!(matches!(out, LpOutcome::Infeasible { .. }));
    }

    #[test]
    fn detects_unboundedness() {
        // min -x  s.t. x - y = 0
        let out = minimize(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0], 1e-12).unwrap();
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn tolerates_redundant_rows() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let out = minimize(&[1.0, 2.0], &a, &[1.0, 2.0], 1e-12).unwrap();
        match out {
            LpOutcome::Optimal { x, objective } => {
                assert!((objective - 1.0).abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale) under Dantzig's rule.
        let cost = [-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let out = minimize(&cost, &a, &[0.0, 0.0, 1.0], 1e-12).unwrap();
        match out {
            LpOutcome::Optimal { objective, .. } => assert!((objective + 0.05).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
