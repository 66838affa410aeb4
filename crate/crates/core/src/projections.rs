//! Euclidean projections onto the constraint sets of the symmetric-flow
//! surrogate, combined with Dykstra's alternating-projection scheme for
//! their intersection.

use crate::linalg::Matrix;
use crate::scalar::Real;

/// A closed convex set of S×S matrices with a computable projection.
pub trait MatrixSet<F> {
    fn project(&self, x: &Matrix<F>) -> Matrix<F>;
    fn residual(&self, x: &Matrix<F>) -> F;
}

/// {X : X = Xᵀ, X ≥ 0, X_ij = 0 off the support}. The projection decomposes
/// over symmetric entry pairs: each pair moves to max(0, average).
pub struct SymSupportNonneg {
    pub support: Vec<Vec<bool>>,
}

impl<F: Real> MatrixSet<F> for SymSupportNonneg {
    fn project(&self, x: &Matrix<F>) -> Matrix<F> {
        let n = x.nrows();
        Matrix::from_fn(n, n, |i, j| {
            if self.support[i][j] {
                ((x[(i, j)] + x[(j, i)]) * F::of(0.5)).max(F::zero())
            } else {
                F::zero()
            }
        })
    }

    fn residual(&self, x: &Matrix<F>) -> F {
        let n = x.nrows();
        let mut r = F::zero();
        for i in 0..n {
            for j in 0..n {
                if !self.support[i][j] {
                    r = r.max(x[(i, j)].abs());
                } else {
                    r = r.max((x[(i, j)] - x[(j, i)]).abs());
                    r = r.max((-x[(i, j)]).max(F::zero()));
                }
            }
        }
        r
    }
}

/// {X : Σ_ij X_ij = 1}; the projection spreads the defect uniformly.
pub struct TotalSumOne;

impl<F: Real> MatrixSet<F> for TotalSumOne {
    fn project(&self, x: &Matrix<F>) -> Matrix<F> {
        let n = x.nrows();
        let defect = (F::one() - x.sum()) / F::of((n * n) as f64);
        Matrix::from_fn(n, n, |i, j| x[(i, j)] + defect)
    }

    fn residual(&self, x: &Matrix<F>) -> F {
        (x.sum() - F::one()).abs()
    }
}

/// Constraints that only involve the row-sum vector r(X): the projection of X
/// is X + (proj_K(r) − r)·1ᵀ/S, where K is a set in R^S.
trait RowSumSet<F> {
    fn project_sums(&self, r: &[F]) -> Vec<F>;
}

fn project_via_row_sums<F: Real, K: RowSumSet<F>>(k: &K, x: &Matrix<F>) -> Matrix<F> {
    let n = x.nrows();
    let r = x.row_sums();
    let target = k.project_sums(&r);
    let scale = F::one() / F::of(n as f64);
    Matrix::from_fn(n, n, |i, j| x[(i, j)] + (target[i] - r[i]) * scale)
}

fn row_sum_residual<F: Real, K: RowSumSet<F>>(k: &K, x: &Matrix<F>) -> F {
    let r = x.row_sums();
    let target = k.project_sums(&r);
    r.iter()
        .zip(&target)
        .map(|(&a, &b)| (a - b).abs())
        .fold(F::zero(), F::max)
}

/// {X : every row sum ≥ floor}.
pub struct RowSumFloor<F> {
    pub floor: F,
}

impl<F: Real> RowSumSet<F> for RowSumFloor<F> {
    fn project_sums(&self, r: &[F]) -> Vec<F> {
        r.iter().map(|&v| v.max(self.floor)).collect()
    }
}

impl<F: Real> MatrixSet<F> for RowSumFloor<F> {
    fn project(&self, x: &Matrix<F>) -> Matrix<F> {
        project_via_row_sums(self, x)
    }

    fn residual(&self, x: &Matrix<F>) -> F {
        row_sum_residual(self, x)
    }
}

/// {X : ‖r(X) − center‖₂ ≤ radius}.
pub struct RowSumBall<F> {
    pub center: Vec<F>,
    pub radius: F,
}

impl<F: Real> RowSumSet<F> for RowSumBall<F> {
    fn project_sums(&self, r: &[F]) -> Vec<F> {
        let dist: F = r
            .iter()
            .zip(&self.center)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<F>()
            .sqrt();
        if dist <= self.radius {
            return r.to_vec();
        }
        let scale = if dist > F::zero() { self.radius / dist } else { F::zero() };
        r.iter()
            .zip(&self.center)
            .map(|(&a, &b)| b + (a - b) * scale)
            .collect()
    }
}

impl<F: Real> MatrixSet<F> for RowSumBall<F> {
    fn project(&self, x: &Matrix<F>) -> Matrix<F> {
        project_via_row_sums(self, x)
    }

    fn residual(&self, x: &Matrix<F>) -> F {
        row_sum_residual(self, x)
    }
}

/// {X : lo_i ≤ r_i(X) ≤ hi_i} per state.
pub struct RowSumBox<F> {
    pub lo: Vec<F>,
    pub hi: Vec<F>,
}

impl<F: Real> RowSumSet<F> for RowSumBox<F> {
    fn project_sums(&self, r: &[F]) -> Vec<F> {
        r.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| v.max(lo).min(hi))
            .collect()
    }
}

impl<F: Real> MatrixSet<F> for RowSumBox<F> {
    fn project(&self, x: &Matrix<F>) -> Matrix<F> {
        project_via_row_sums(self, x)
    }

    fn residual(&self, x: &Matrix<F>) -> F {
        row_sum_residual(self, x)
    }
}

/// Dykstra's algorithm for the projection onto an intersection of convex
/// sets. Returns the iterate once the cycle-to-cycle change drops below `tol`
/// (or after `max_cycles`).
pub fn dykstra<F: Real>(
    sets: &[&dyn MatrixSet<F>],
    x0: &Matrix<F>,
    max_cycles: usize,
    tol: F,
) -> Matrix<F> {
    let n = x0.nrows();
    let mut x = x0.clone();
    let mut corrections: Vec<Matrix<F>> = vec![Matrix::zeros(n, n); sets.len()];
    for _ in 0..max_cycles {
        let before = x.clone();
        for (set, corr) in sets.iter().zip(corrections.iter_mut()) {
            let shifted = x.add(corr);
            let projected = set.project(&shifted);
            *corr = shifted.sub(&projected);
            x = projected;
        }
        if x.sub(&before).max_abs() < tol {
            break;
        }
    }
    x
}

/// Largest constraint residual of `x` across the given sets.
pub fn max_residual<F: Real>(sets: &[&dyn MatrixSet<F>], x: &Matrix<F>) -> F {
    sets.iter().map(|s| s.residual(x)).fold(F::zero(), F::max)
}

/// Euclidean projection of a vector onto the probability simplex
/// (sort-based algorithm).
pub fn project_simplex<F: Real>(v: &[F]) -> Vec<F> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = F::zero();
    let mut theta = F::zero();
    for (k, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let t = (cumsum - F::one()) / F::of((k + 1) as f64);
        if u - t > F::zero() {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(F::zero())).collect()
}
