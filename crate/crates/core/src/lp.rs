//! Exact rational simplex for `max c·x  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The origin is feasible for this class, so a single phase suffices. Bland's
//! rule picks entering and leaving variables, which rules out cycling. Dual
//! values are read off the slack columns of the final objective row.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};

use crate::rational::{fmt_q, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("row {0:?} has a negative right-hand side; the origin must be feasible")]
    NegativeRhs(String),
    #[error("row {row:?} refers to variable {var} which does not exist")]
    BadVariable { row: String, var: usize },
}

/// `Σ coeffs · x ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub label: String,
    pub coeffs: Vec<(usize, Q)>,
    pub rhs: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearProgram {
    pub variables: Vec<String>,
    /// Maximized.
    pub objective: Vec<Q>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<Q>,
    pub value: Q,
    /// One multiplier per row; meaningful when optimal.
    pub duals: Vec<Q>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn add_variable(&mut self, name: impl Into<String>, objective: Q) -> usize {
        self.variables.push(name.into());
        self.objective.push(objective);
        self.variables.len() - 1
    }

    pub fn add_row(&mut self, label: impl Into<String>, coeffs: Vec<(usize, Q)>, rhs: Q) {
        let mut merged: Vec<(usize, Q)> = Vec::with_capacity(coeffs.len());
        for (v, c) in coeffs {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, acc)) => *acc += c,
                None => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        merged.sort_by_key(|(v, _)| *v);
        self.rows.push(Row { label: label.into(), coeffs: merged, rhs });
    }

    /// Plain-text dump, one constraint per line.
    pub fn render(&self) -> String {
        let term = |c: &Q, v: usize| format!("{} {}", fmt_q(c), self.variables[v]);
        let mut out = String::new();
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(v, c)| term(c, v))
            .collect();
        let _ = writeln!(out, "maximize {}", if obj.is_empty() { "0".into() } else { obj.join(" + ") });
        let _ = writeln!(out, "subject to");
        for r in &self.rows {
            let lhs: Vec<String> = r.coeffs.iter().map(|(v, c)| term(c, *v)).collect();
            let lhs = if lhs.is_empty() { "0".to_string() } else { lhs.join(" + ") };
            let _ = writeln!(out, "  {}: {} <= {}", r.label, lhs, fmt_q(&r.rhs));
        }
        let _ = writeln!(out, "bounds");
        let _ = writeln!(out, "  {} >= 0", self.variables.join(", "));
        out
    }

    fn check(&self) -> Result<(), LpError> {
        for r in &self.rows {
            if r.rhs.is_negative() {
                return Err(LpError::NegativeRhs(r.label.clone()));
            }
            if let Some(&(v, _)) = r.coeffs.iter().find(|(v, _)| *v >= self.variables.len()) {
                return Err(LpError::BadVariable { row: r.label.clone(), var: v });
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.check()?;
        let m = self.rows.len();
        let n = self.variables.len();
        let width = n + m;
        let mut a: Vec<Vec<Q>> = Vec::with_capacity(m);
        for (i, r) in self.rows.iter().enumerate() {
            let mut row = vec![Q::zero(); width];
            for (v, c) in &r.coeffs {
                row[*v] = c.clone();
            }
            row[n + i] = Q::from_integer(1.into());
            a.push(row);
        }
        let mut b: Vec<Q> = self.rows.iter().map(|r| r.rhs.clone()).collect();
        let mut cost: Vec<Q> = self.objective.iter().map(|c| -c).chain(std::iter::repeat_n(Q::zero(), m)).collect();
        let mut z = Q::zero();
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut pivots = 0;

        while let Some(e) = (0..width).find(|&j| cost[j].is_negative()) {
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..m {
                if a[i][e].is_positive() {
                    let ratio = &b[i] / &a[i][e];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((p, _)) = leave else {
                return Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    x: vec![Q::zero(); n],
                    value: z,
                    duals: vec![Q::zero(); m],
                    pivots,
                });
            };
            pivots += 1;
            let piv = a[p][e].clone();
            for v in a[p].iter_mut() {
                if !v.is_zero() {
                    *v /= &piv;
                }
            }
            b[p] /= &piv;
            let nz: Vec<usize> = (0..width).filter(|&j| !a[p][j].is_zero()).collect();
            let prow: Vec<(usize, Q)> = nz.iter().map(|&j| (j, a[p][j].clone())).collect();
            let pb = b[p].clone();
            for i in 0..m {
                if i == p || a[i][e].is_zero() {
                    continue;
                }
                let f = a[i][e].clone();
                for (j, v) in &prow {
                    a[i][*j] -= &f * v;
                }
                b[i] -= &f * &pb;
            }
            if !cost[e].is_zero() {
                let f = cost[e].clone();
                for (j, v) in &prow {
                    cost[*j] -= &f * v;
                }
                z -= &f * &pb;
            }
            basis[p] = e;
        }

        let mut x = vec![Q::zero(); n];
        for (i, &v) in basis.iter().enumerate() {
            if v < n {
                x[v] = b[i].clone();
            }
        }
        let duals = cost[n..].to_vec();
        Ok(LpSolution { status: LpStatus::Optimal, x, value: z, duals, pivots })
    }

    /// Exact check that `y ≥ 0`, `Aᵀy ≥ c` and `bᵀy = value`: a dual
    /// certificate that no feasible point does better than `value`.
    pub fn verify_dual(&self, y: &[Q], value: &Q) -> bool {
        if y.len() != self.rows.len() || y.iter().any(|v| v.is_negative()) {
            return false;
        }
        let mut aty = vec![Q::zero(); self.variables.len()];
        let mut bty = Q::zero();
        for (r, yi) in self.rows.iter().zip(y) {
            if yi.is_zero() {
                continue;
            }
            for (v, c) in &r.coeffs {
                aty[*v] += c * yi;
            }
            bty += &r.rhs * yi;
        }
        aty.iter().zip(&self.objective).all(|(l, c)| l >= c) && &bty == value
    }

    /// Whether `x` satisfies every row and the sign constraints.
    pub fn is_feasible(&self, x: &[Q]) -> bool {
        x.len() == self.variables.len()
            && x.iter().all(|v| !v.is_negative())
            && self.rows.iter().all(|r| {
                let lhs: Q = r.coeffs.iter().map(|(v, c)| c * &x[*v]).sum();
                lhs <= r.rhs
            })
    }

    pub fn objective_at(&self, x: &[Q]) -> Q {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn textbook_problem() {
        // max 3x + 5y  s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  →  36 at (2, 6)
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("x", qi(3));
        let y = lp.add_variable("y", qi(5));
        lp.add_row("a", vec![(x, qi(1))], qi(4));
        lp.add_row("b", vec![(y, qi(2))], qi(12));
        lp.add_row("c", vec![(x, qi(3)), (y, qi(2))], qi(18));
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, qi(36));
        assert_eq!(s.x, vec![qi(2), qi(6)]);
        assert_eq!(s.duals, vec![qi(0), q(3, 2), qi(1)]);
        assert!(lp.verify_dual(&s.duals, &s.value));
        assert!(lp.is_feasible(&s.x));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example, made origin-feasible.
        let mut lp = LinearProgram::default();
        let v: Vec<usize> = (0..4).map(|i| lp.add_variable(format!("x{i}"), Q::zero())).collect();
        lp.objective = vec![q(3, 4), qi(-150), q(1, 50), qi(-6)];
        lp.add_row("r1", vec![(v[0], q(1, 4)), (v[1], qi(-60)), (v[2], q(-1, 25)), (v[3], qi(9))], qi(0));
        lp.add_row("r2", vec![(v[0], q(1, 2)), (v[1], qi(-90)), (v[2], q(-1, 50)), (v[3], qi(3))], qi(0));
        lp.add_row("r3", vec![(v[2], qi(1))], qi(1));
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.value, q(1, 20));
        assert!(lp.verify_dual(&s.duals, &s.value));
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("x", qi(1));
        let y = lp.add_variable("y", qi(0));
        lp.add_row("r", vec![(x, qi(1)), (y, qi(-1))], qi(1));
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_rejected() {
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("x", qi(1));
        lp.add_row("r", vec![(x, qi(1))], qi(-1));
        assert_eq!(lp.solve(), Err(LpError::NegativeRhs("r".into())));
    }

    #[test]
    fn render_lists_rows() {
        let mut lp = LinearProgram::default();
        let x = lp.add_variable("delta", qi(1));
        lp.add_row("bound", vec![(x, qi(1))], qi(1));
        let text = lp.render();
        assert!(text.contains("maximize 1 delta"));
        assert!(text.contains("bound: 1 delta <= 1"));
    }
}
