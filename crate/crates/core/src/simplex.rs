//! Dense two-phase simplex for small equality-form LPs:
//! minimize cᵀx subject to Ax = b, x ≥ 0.
//!
//! Bland's rule is used throughout, so the method cannot cycle; problem sizes
//! here (state-action polytopes) are far below anything needing a sparse or
//! revised implementation.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LpSolution<F> {
    pub x: Vec<F>,
    pub objective: F,
    /// most negative reduced cost at termination (optimality certificate:
    /// no entry below -1e-9)
    pub min_reduced_cost: F,
}

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const MAX_PIVOTS: usize = 200_000;

struct Tableau<F> {
    /// rows x (num_cols + 1); last column is the rhs
    rows: Vec<Vec<F>>,
    basis: Vec<usize>,
    num_cols: usize,
}

impl<F: Real> Tableau<F> {
    fn rhs(&self, i: usize) -> F {
        self.rows[i][self.num_cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v = *v / piv;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != F::zero() {
                for (v, &p) in r.iter_mut().zip(&pivot_row) {
                    *v = *v - factor * p;
                }
                r[col] = F::zero(); // exact, against rounding residue
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule on a reduced-cost row: entering = smallest column index
    /// with a negative reduced cost, leaving = ratio test with smallest basis
    /// index breaking ties. Returns false when optimal, errors when unbounded.
    fn bland_step(&mut self, reduced: &[F], allowed: &dyn Fn(usize) -> bool) -> Result<bool> {
        let tol = F::of(PIVOT_TOL);
        let enter = match (0..self.num_cols)
            .find(|&j| allowed(j) && reduced[j] < -tol)
        {
            Some(j) => j,
            None => return Ok(false),
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = F::infinity();
        for i in 0..self.rows.len() {
            let a = self.rows[i][enter];
            if a > tol {
                let ratio = self.rhs(i) / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - tol
                            || (ratio < best_ratio + tol && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leave = Some(i);
                    best_ratio = ratio;
                }
            }
        }
        let leave = leave.ok_or_else(|| {
            Error::Infeasible("objective unbounded below on the given polytope".into())
        })?;
        self.pivot(leave, enter);
        Ok(true)
    }

    /// Reduced costs r_j = c_j - c_Bᵀ (B⁻¹A)_j for a cost vector over all
    /// columns (the tableau rows already are B⁻¹[A|b]).
    fn reduced_costs(&self, cost: &[F]) -> Vec<F> {
        let mut r = cost.to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != F::zero() {
                for j in 0..self.num_cols {
                    r[j] = r[j] - cb * self.rows[i][j];
                }
            }
        }
        for &bi in &self.basis {
            r[bi] = F::zero();
        }
        r
    }

    fn objective(&self, cost: &[F]) -> F {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &bi)| cost[bi] * self.rhs(i))
            .sum()
    }
}

/// Solves min cᵀx s.t. Ax = b, x ≥ 0. Returns `Infeasible` when the feasible
/// region is empty (or the objective is unbounded, which cannot happen on a
/// bounded polytope). Redundant equality rows are tolerated.
pub fn solve_lp<F: Real>(a: &Matrix<F>, b: &[F], c: &[F]) -> Result<LpSolution<F>> {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m, "rhs length mismatch");
    assert_eq!(c.len(), n, "cost length mismatch");

    // phase 1: artificial variable per row, flip rows so rhs >= 0
    let total = n + m;
    let mut rows: Vec<Vec<F>> = Vec::with_capacity(m);
    for i in 0..m {
        let flip = b[i] < F::zero();
        let mut r = vec![F::zero(); total + 1];
        for j in 0..n {
            r[j] = if flip { -a[(i, j)] } else { a[(i, j)] };
        }
        r[n + i] = F::one();
        r[total] = if flip { -b[i] } else { b[i] };
        rows.push(r);
    }
    let mut tab = Tableau { rows, basis: (n..total).collect(), num_cols: total };

    let mut phase1_cost = vec![F::zero(); total];
    for j in n..total {
        phase1_cost[j] = F::one();
    }
    run_simplex(&mut tab, &phase1_cost, &|_| true)?;
    if tab.objective(&phase1_cost) > F::of(FEAS_TOL) {
        return Err(Error::Infeasible("equality system has no nonnegative solution".into()));
    }

    // drive artificials out of the basis; rows where that is impossible are
    // redundant and get dropped
    let mut drop_rows = Vec::new();
    for i in 0..tab.rows.len() {
        if tab.basis[i] >= n {
            let col = (0..n).find(|&j| tab.rows[i][j].abs() > F::of(PIVOT_TOL));
            match col {
                Some(j) => tab.pivot(i, j),
                None => drop_rows.push(i),
            }
        }
    }
    for &i in drop_rows.iter().rev() {
        tab.rows.remove(i);
        tab.basis.remove(i);
    }

    // phase 2 over the original columns only
    let mut phase2_cost = vec![F::zero(); total];
    phase2_cost[..n].copy_from_slice(c);
    let allowed = |j: usize| j < n;
    run_simplex(&mut tab, &phase2_cost, &allowed)?;

    let reduced = tab.reduced_costs(&phase2_cost);
    let min_reduced = (0..n).map(|j| reduced[j]).fold(F::infinity(), F::min);
    let mut x = vec![F::zero(); n];
    for (i, &bi) in tab.basis.iter().enumerate() {
        if bi < n {
            x[bi] = tab.rhs(i).max(F::zero());
        }
    }
    Ok(LpSolution { x, objective: tab.objective(&phase2_cost), min_reduced_cost: min_reduced })
}

fn run_simplex<F: Real>(
    tab: &mut Tableau<F>,
    cost: &[F],
    allowed: &dyn Fn(usize) -> bool,
) -> Result<()> {
    for _ in 0..MAX_PIVOTS {
        let reduced = tab.reduced_costs(cost);
        if !tab.bland_step(&reduced, allowed)? {
            return Ok(());
        }
    }
    Err(Error::MaxItersExceeded(MAX_PIVOTS))
}
