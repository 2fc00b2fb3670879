//! Small dense linear algebra: row-major matrices, orthonormal bases,
//! a Jacobi eigensolver and CGLS. Everything here targets desk-scale
//! problems (a few hundred rows), where dense arithmetic is the simplest
//! thing that is exactly auditable.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len(), context: "from_rows" });
            }
            data.extend_from_slice(r);
        }
        Ok(Mat { rows: rows.len(), cols, data })
    }

    /// Build from (row, col, value) triplets; later duplicates accumulate.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Mat::zeros(rows, cols);
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidInput(format!("triplet ({i},{j}) out of bounds for {rows}x{cols}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at ({i},{j})")));
            }
            m[(i, j)] += v;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            y[i] = dot(self.row(i), x);
        }
        y
    }

    /// y = A^T x.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi != 0.0 {
                let row = self.row(i);
                for j in 0..self.cols {
                    y[j] += xi * row[j];
                }
            }
        }
        y
    }

    /// A A^T, symmetric `rows x rows` Gram matrix of the rows.
    pub fn aat(&self) -> Mat {
        let mut g = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Indices of rows that are identically zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.row(i).iter().all(|&v| v == 0.0)).collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// a + s*b
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    axpy(a, -1.0, b)
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// Orthonormal basis of the span of `vectors` by twice-iterated
/// Gram-Schmidt. Vectors whose remainder falls below `rel_tol` times
/// their original norm are treated as dependent and dropped.
pub fn orthonormal_span(vectors: &[Vec<f64>], rel_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let original = norm2(v);
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let rem = norm2(&w);
        if rem > rel_tol * original {
            let inv = 1.0 / rem;
            for wi in w.iter_mut() {
                *wi *= inv;
            }
            basis.push(w);
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `basis` in R^n.
/// `basis` must already be orthonormal.
pub fn orthonormal_complement(basis: &[Vec<f64>], n: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    let mut full = basis.to_vec();
    let mut complement = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut w = e;
        for _ in 0..2 {
            for b in &full {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let rem = norm2(&w);
        if rem > rel_tol {
            let inv = 1.0 / rem;
            for wi in w.iter_mut() {
                *wi *= inv;
            }
            full.push(w.clone());
            complement.push(w);
        }
    }
    complement
}

/// Largest eigenvalue of A A^T by power iteration, overestimated by a
/// small safety factor so it is safe as a Lipschitz constant.
pub fn op_norm_sq_upper(a: &Mat) -> f64 {
    let m = a.rows();
    if m == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
    let nrm = norm2(&v);
    for x in v.iter_mut() {
        *x /= nrm;
    }
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = a.matvec(&a.tr_matvec(&v));
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = dot(&w, &v);
        let rel = (next - lambda).abs() / next.max(1e-300);
        lambda = next;
        v = scale(&w, 1.0 / nw);
        if rel < 1e-12 {
            break;
        }
    }
    lambda * 1.02
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), both unordered.
pub fn jacobi_eigh(s: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(s.rows(), s.cols());
    let n = s.rows();
    let mut a = s.clone();
    let mut v = Mat::identity(n);
    let scale0 = a.max_abs().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let evals = (0..n).map(|i| a[(i, i)]).collect();
    (evals, v)
}

/// CGLS for min_x || apply(x) - b ||. `apply` maps R^k -> R^l and
/// `apply_t` is its adjoint. Starting from x0 = 0 it converges to the
/// minimum-norm least-squares solution.
pub fn cgls<F, G>(apply: F, apply_t: G, b: &[f64], k: usize, tol: f64, max_iter: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = vec![0.0; k];
    let mut r = b.to_vec();
    let mut s = apply_t(&r);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let gamma0 = gamma;
    if gamma0 == 0.0 {
        return x;
    }
    // The normal-equations residual gamma = ||apply_t(r)||^2 is the
    // gradient of the least-squares objective; callers need it small. At
    // the rounding floor gamma oscillates and the iterate can drift, so
    // track the best-gamma iterate and stop once it stops improving.
    let mut best_x = x.clone();
    let mut best_gamma = gamma;
    let mut stagnant = 0u32;
    for _ in 0..max_iter {
        let q = apply(&p);
        let qq = dot(&q, &q);
        if !qq.is_finite() || qq <= 1e-300 * gamma.max(1.0) {
            break;
        }
        let alpha = gamma / qq;
        if !alpha.is_finite() {
            break;
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        s = apply_t(&r);
        let gamma_new = dot(&s, &s);
        if !gamma_new.is_finite() {
            break;
        }
        if gamma_new < best_gamma * (1.0 - 1e-10) {
            best_gamma = gamma_new;
            best_x.copy_from_slice(&x);
            stagnant = 0;
        } else {
            if gamma_new <= best_gamma {
                best_gamma = gamma_new;
                best_x.copy_from_slice(&x);
            }
            stagnant += 1;
            if stagnant >= 25 {
                break;
            }
        }
        if gamma_new <= tol * tol * gamma0 {
            break;
        }
        let beta = gamma_new / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_new;
    }
    best_x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_adjoint_agree() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 3.0]]).unwrap();
        let x = vec![1.0, 1.0, 2.0];
        let y = vec![2.0, -1.0];
        // <Ax, y> == <x, A^T y>
        let lhs = dot(&a.matvec(&x), &y);
        let rhs = dot(&x, &a.tr_matvec(&y));
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn complement_of_constants() {
        let ones = vec![vec![0.5, 0.5, 0.5, 0.5]];
        let basis = orthonormal_span(&ones, 1e-12);
        assert_eq!(basis.len(), 1);
        let comp = orthonormal_complement(&basis, 4, 1e-10);
        assert_eq!(comp.len(), 3);
        for c in &comp {
            assert!(dot(c, &basis[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_recovers_spectrum() {
        let s = Mat::from_rows(vec![
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let (mut evals, _) = jacobi_eigh(&s);
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [2.0 - 2.0f64.sqrt(), 2.0, 2.0 + 2.0f64.sqrt()];
        for (e, x) in evals.iter().zip(expected) {
            assert!((e - x).abs() < 1e-10);
        }
    }

    #[test]
    fn cgls_solves_least_squares() {
        let a = Mat::from_rows(vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let b = vec![1.0, 2.0, 2.0];
        let x = cgls(|v| a.matvec(v), |v| a.tr_matvec(v), &b, 2, 1e-14, 100);
        // Normal equations residual should vanish.
        let r = sub(&a.matvec(&x), &b);
        let g = a.tr_matvec(&r);
        assert!(norm2(&g) < 1e-10);
    }

    #[test]
    fn power_iteration_upper_bound() {
        let a = Mat::from_rows(vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]]).unwrap();
        let l = op_norm_sq_upper(&a);
        // A A^T = [[2,-1],[-1,2]], eigenvalues 1 and 3.
        assert!((3.0..3.2).contains(&l));
    }
}
