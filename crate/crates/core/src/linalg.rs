//! Small dense linear-algebra kernels sized for desk-scale chains (S up to a
//! few hundred): Gaussian elimination, cyclic Jacobi for symmetric matrices,
//! power iteration, and graph checks on transition structures.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix<F> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// y = A x
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// y = Aᵀ x
    pub fn matvec_t(&self, x: &[F]) -> Vec<F> {
        assert_eq!(self.rows, x.len());
        let mut y = vec![F::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for j in 0..self.cols {
                y[j] = y[j] + self[(i, j)] * xi;
            }
        }
        y
    }

    pub fn scale(&self, c: F) -> Matrix<F> {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = *v * c;
        }
        out
    }

    pub fn add(&self, other: &Matrix<F>) -> Matrix<F> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v = *v + *w;
        }
        out
    }

    pub fn sub(&self, other: &Matrix<F>) -> Matrix<F> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v = *v - *w;
        }
        out
    }

    pub fn frobenius_norm(&self) -> F {
        self.data.iter().map(|&v| v * v).sum::<F>().sqrt()
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<F> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn sum(&self) -> F {
        self.data.iter().copied().sum()
    }
}

impl<F> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if numerically singular.
pub fn solve_square<F: Real>(a: &Matrix<F>, b: &[F]) -> Option<Vec<F>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let tiny = F::of(1e3) * F::epsilon() * (F::one() + m.max_abs());
    for col in 0..n {
        // partial pivot
        let mut piv = col;
        for r in col + 1..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        if m[(piv, col)].abs() <= tiny {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            rhs.swap(col, piv);
        }
        let d = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f == F::zero() {
                continue;
            }
            for j in col..n {
                m[(r, j)] = m[(r, j)] - f * m[(col, j)];
            }
            rhs[r] = rhs[r] - f * rhs[col];
        }
    }
    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s = s - m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Some(x)
}

/// Least-squares solution of the (possibly tall) system `a x = b` via the
/// normal equations. Suited to the small, well-conditioned systems here.
pub fn solve_least_squares<F: Real>(a: &Matrix<F>, b: &[F]) -> Option<Vec<F>> {
    let at = a.transpose();
    let ata = at.matmul(a);
    let atb = at.matvec(b);
    solve_square(&ata, &atb)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues<F: Real>(a: &Matrix<F>) -> Vec<F> {
    let (vals, _) = jacobi_eigen(a, false);
    vals
}

/// Eigen decomposition of a symmetric matrix. When `with_vectors` is set the
/// returned matrix holds eigenvectors in its columns, aligned with the values.
pub fn jacobi_eigen<F: Real>(a: &Matrix<F>, with_vectors: bool) -> (Vec<F>, Option<Matrix<F>>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut v = if with_vectors { Some(Matrix::<F>::identity(n)) } else { None };
    let tol = F::epsilon() * F::of(n as f64) * (F::one() + m.max_abs());
    for _sweep in 0..100 {
        let mut off = F::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (F::of(2.0) * apq);
                // stable tangent of the rotation angle
                let t = {
                    let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                // rows/cols p and q
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                if let Some(ref mut vm) = v {
                    for k in 0..n {
                        let vkp = vm[(k, p)];
                        let vkq = vm[(k, q)];
                        vm[(k, p)] = c * vkp - s * vkq;
                        vm[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[(i, i)]).collect();
    (vals, v)
}

/// Spectral norm (largest singular value) of a general matrix, computed as the
/// square root of the top eigenvalue of MᵀM via Jacobi.
pub fn spectral_norm<F: Real>(m: &Matrix<F>) -> F {
    let mtm = m.transpose().matmul(m);
    let vals = jacobi_eigenvalues(&mtm);
    let top = vals.iter().fold(F::zero(), |a, &b| a.max(b));
    top.max(F::zero()).sqrt()
}

/// Top eigenpair (by absolute value) of a symmetric matrix: Jacobi for the
/// values, inverse alignment via the returned eigenvector matrix.
pub fn top_eigenpair_symmetric<F: Real>(m: &Matrix<F>) -> (F, Vec<F>) {
    let n = m.nrows();
    let (vals, vecs) = jacobi_eigen(m, true);
    let vecs = vecs.unwrap();
    let mut best = 0;
    for i in 1..n {
        if vals[i].abs() > vals[best].abs() {
            best = i;
        }
    }
    let v = (0..n).map(|k| vecs[(k, best)]).collect();
    (vals[best], v)
}

/// Strongly connected components by Kosaraju's algorithm over a boolean
/// adjacency. Returns a component id per node; ids are in reverse
/// topological order of the condensation.
pub fn strongly_connected_components(adj: &[Vec<bool>]) -> Vec<usize> {
    fn post_order(u: usize, adj: &[Vec<bool>], seen: &mut [bool], order: &mut Vec<usize>) {
        seen[u] = true;
        for v in 0..adj.len() {
            if adj[u][v] && !seen[v] {
                post_order(v, adj, seen, order);
            }
        }
        order.push(u);
    }
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if !seen[start] {
            post_order(start, adj, &mut seen, &mut order);
        }
    }
    // second pass on the transpose
    let mut comp = vec![usize::MAX; n];
    let mut c = 0;
    for &start in order.iter().rev() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = c;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if adj[v][u] && comp[v] == usize::MAX {
                    comp[v] = c;
                    stack.push(v);
                }
            }
        }
        c += 1;
    }
    comp
}

/// Recurrent classes of a directed graph: SCCs with no edge leaving them.
pub fn recurrent_classes(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let comp = strongly_connected_components(adj);
    let ncomp = comp.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut closed = vec![true; ncomp];
    for u in 0..n {
        for v in 0..n {
            if adj[u][v] && comp[u] != comp[v] {
                closed[comp[u]] = false;
            }
        }
    }
    (0..ncomp)
        .filter(|&c| closed[c])
        .map(|c| (0..n).filter(|&u| comp[u] == c).collect())
        .collect()
}

/// Period of an irreducible directed graph: gcd over all edges (u,v) of
/// level(u)+1-level(v) with BFS levels from node 0.
pub fn graph_period(adj: &[Vec<bool>]) -> usize {
    let n = adj.len();
    let mut level = vec![i64::MIN; n];
    let mut queue = std::collections::VecDeque::new();
    level[0] = 0;
    queue.push_back(0usize);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adj[u][v] && level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: usize = 0;
    for u in 0..n {
        for v in 0..n {
            if adj[u][v] && level[u] != i64::MIN && level[v] != i64::MIN {
                let d = (level[u] + 1 - level[v]).unsigned_abs() as usize;
                if d != 0 {
                    g = gcd(g, d);
                }
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if a == 0 {
        b
    } else {
        gcd(b % a, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn solves_square_system() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let x = solve_square(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_rejected() {
        let a = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(solve_square(&a, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let mut vals = jacobi_eigenvalues(&a);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rotation_is_one() {
        let a = mat(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert!((spectral_norm(&a) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn top_eigenpair_is_dominant() {
        let a = mat(&[&[0.0, 2.0], &[2.0, 0.0]]);
        let (val, v) = top_eigenpair_symmetric(&a);
        assert!((val.abs() - 2.0).abs() < 1e-12);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scc_and_recurrence() {
        // 0 -> 1 -> 0 forms a closed class; 2 -> 0 is transient
        let adj = vec![
            vec![false, true, false],
            vec![true, false, false],
            vec![true, false, false],
        ];
        let classes = recurrent_classes(&adj);
        assert_eq!(classes.len(), 1);
        let mut c = classes[0].clone();
        c.sort();
        assert_eq!(c, vec![0, 1]);
    }

    #[test]
    fn period_of_flip_and_loop() {
        let flip = vec![vec![false, true], vec![true, false]];
        assert_eq!(graph_period(&flip), 2);
        let lazy = vec![vec![true, true], vec![true, false]];
        assert_eq!(graph_period(&lazy), 1);
    }
}
