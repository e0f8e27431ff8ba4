//! Dense row-major matrices and the handful of factorizations the estimators need:
//! rank-revealing Householder QR for least squares and one-sided Jacobi SVD for PCA.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * p);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), p, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: n, cols: p, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[T]>>(columns: &[C]) -> Self {
        let p = columns.len();
        let n = columns.first().map_or(0, |c| c.as_ref().len());
        let mut m = Self::zeros(n, p);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            assert_eq!(c.len(), n, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[T]) {
        assert_eq!(values.len(), self.rows);
        for (r, &v) in values.iter().enumerate() {
            self[(r, c)] = v;
        }
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        self.rows_iter().map(|row| dot(row, v)).collect()
    }

    /// `selfᵀ v`.
    pub fn tr_mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![T::zero(); self.cols];
        for (row, &w) in self.rows_iter().zip(v) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
        out
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for r in 0..self.rows {
            for (j, &c) in idx.iter().enumerate() {
                out[(r, j)] = self[(r, c)];
            }
        }
        out
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Self { rows: self.rows, cols, data }
    }

    pub fn column_means(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.cols];
        for row in self.rows_iter() {
            for (a, &x) in m.iter_mut().zip(row) {
                *a += x;
            }
        }
        let n = T::from_usize_lossy(self.rows.max(1));
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Subtracts the column means and returns them.
    pub fn center_columns(&mut self) -> Vec<T> {
        let means = self.column_means();
        for r in 0..self.rows {
            for (x, &mu) in self.row_mut(r).iter_mut().zip(&means) {
                *x -= mu;
            }
        }
        means
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn has_missing(&self) -> bool {
        self.data.iter().any(|x| x.is_nan())
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Householder QR of an `n × p` matrix (`n ≥ p`) that defers linearly
/// dependent columns to the end, so the rank and the first dependent column
/// (in original order) are both available.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    /// Householder vectors below the diagonal, R on and above it.
    qr: Matrix<T>,
    tau: Vec<T>,
    /// `perm[j]` is the original column stored at position `j`.
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (n, p) = (a.nrows(), a.ncols());
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut tau = vec![T::zero(); p.min(n)];
        let orig_norms: Vec<T> = (0..p).map(|j| norm(&qr.column(j))).collect();
        let rel_tol = T::epsilon().powf(T::lit(0.8)) * T::lit(10.0);
        let mut rank = 0;

        for k in 0..p.min(n) {
            // Take the first remaining column (original order) that is not in the
            // span of the columns already factored; dependent ones drift to the end.
            let mut chosen = None;
            for j in k..p {
                let mut s = T::zero();
                for i in k..n {
                    s += qr[(i, j)] * qr[(i, j)];
                }
                let s = s.sqrt();
                if s > rel_tol * orig_norms[perm[j]] && s > T::zero() {
                    chosen = Some((j, s));
                    break;
                }
            }
            let Some((best, best_norm)) = chosen else { break };
            if best != k {
                for i in 0..n {
                    qr.row_mut(i)[k..=best].rotate_right(1);
                }
                perm[k..=best].rotate_right(1);
            }
            let alpha = {
                let x0 = qr[(k, k)];
                let s = best_norm;
                if x0 > T::zero() { -s } else { s }
            };
            let v0 = qr[(k, k)] - alpha;
            // v = x - alpha e1, scaled so v[0] = 1
            for i in (k + 1)..n {
                qr[(i, k)] /= v0;
            }
            let t = -v0 / alpha;
            tau[k] = t;
            qr[(k, k)] = alpha;
            for j in (k + 1)..p {
                let mut s = qr[(k, j)];
                for i in (k + 1)..n {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= t;
                qr[(k, j)] -= s;
                for i in (k + 1)..n {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= s * vik;
                }
            }
            rank += 1;
        }
        Self { qr, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Original index of the first column found to be linearly dependent, if any.
    pub fn first_dependent_column(&self) -> Option<usize> {
        let p = self.qr.ncols();
        if self.rank < p {
            self.perm[self.rank..].iter().copied().min()
        } else {
            None
        }
    }

    /// Applies `Qᵀ` to `b` in place.
    fn apply_qt(&self, b: &mut [T]) {
        let n = self.qr.nrows();
        for k in 0..self.rank {
            let mut s = b[k];
            for i in (k + 1)..n {
                s += self.qr[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in (k + 1)..n {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Least-squares solution in the original column order. Requires full column rank.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let p = self.qr.ncols();
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut z = vec![T::zero(); p];
        for k in (0..self.rank).rev() {
            let mut s = qtb[k];
            for j in (k + 1)..self.rank {
                s -= self.qr[(k, j)] * z[j];
            }
            z[k] = s / self.qr[(k, k)];
        }
        let mut x = vec![T::zero(); p];
        for (j, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[j];
        }
        x
    }

    /// `(AᵀA)⁻¹` in the original column order. Requires full column rank.
    pub fn gram_inverse(&self) -> Matrix<T> {
        let p = self.qr.ncols();
        // invert upper-triangular R
        let mut rinv = Matrix::zeros(p, p);
        for j in 0..p {
            rinv[(j, j)] = T::one() / self.qr[(j, j)];
            for i in (0..j).rev() {
                let mut s = T::zero();
                for k in (i + 1)..=j {
                    s += self.qr[(i, k)] * rinv[(k, j)];
                }
                rinv[(i, j)] = -s / self.qr[(i, i)];
            }
        }
        let mut out = Matrix::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                let mut s = T::zero();
                for k in a.max(b)..p {
                    s += rinv[(a, k)] * rinv[(b, k)];
                }
                out[(self.perm[a], self.perm[b])] = s;
            }
        }
        out
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` with `s` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

/// One-sided Jacobi SVD. Accurate to working precision for the small and
/// medium dense matrices used here.
pub fn svd<T: Scalar>(a: &Matrix<T>) -> Svd<T> {
    if a.nrows() < a.ncols() {
        let t = svd_tall(&a.transpose());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    svd_tall(a)
}

fn svd_tall<T: Scalar>(a: &Matrix<T>) -> Svd<T> {
    let (n, p) = (a.nrows(), a.ncols());
    // work column-major for cache-friendly column rotations
    let mut cols: Vec<Vec<T>> = (0..p).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..p)
        .map(|j| {
            let mut e = vec![T::zero(); p];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                rotate(&mut left[i], &mut right[0], c, s);
                let (left, right) = v.split_at_mut(j);
                rotate(&mut left[i], &mut right[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<(T, usize)> = cols.iter().enumerate().map(|(j, c)| (norm(c), j)).collect();
    sv.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal).then(x.1.cmp(&y.1)));
    let mut u = Matrix::zeros(n, p);
    let mut vm = Matrix::zeros(p, p);
    let mut s_out = Vec::with_capacity(p);
    let smax = sv.first().map_or(T::zero(), |x| x.0);
    for (k, &(s, j)) in sv.iter().enumerate() {
        s_out.push(s);
        for r in 0..p {
            vm[(r, k)] = v[j][r];
        }
        if s > smax * eps * T::from_usize_lossy(n.max(p)) && s > T::zero() {
            for r in 0..n {
                u[(r, k)] = cols[j][r] / s;
            }
        }
    }
    Svd { u, singular_values: s_out, v: vm }
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as columns.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let p = a.nrows();
    let mut m = a.clone();
    let mut v = Matrix::identity(p);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let off: T = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)] * m[(i, j)]).sum();
        let diag: T = (0..p).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let g = m[(i, j)];
                if g == T::zero() {
                    continue;
                }
                let theta = (m[(j, j)] - m[(i, i)]) / (T::lit(2.0) * g);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..p {
                    let (mki, mkj) = (m[(k, i)], m[(k, j)]);
                    m[(k, i)] = c * mki - s * mkj;
                    m[(k, j)] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let (mik, mjk) = (m[(i, k)], m[(j, k)]);
                    m[(i, k)] = c * mik - s * mjk;
                    m[(j, k)] = s * mik + c * mjk;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * vki - s * vkj;
                    v[(k, j)] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m[(y, y)].partial_cmp(&m[(x, x)]).unwrap_or(std::cmp::Ordering::Equal).then(x.cmp(&y)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    (values, v.select_columns(&order))
}

/// Solves the square system `A x = b` by pivoted QR.
pub fn solve_square<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let qr = PivotedQr::new(a);
    if let Some(c) = qr.first_dependent_column() {
        return Err(Error::RankDeficient(c));
    }
    Ok(qr.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_solves_overdetermined_system() {
        let a = Matrix::<f64>::from_rows(&[[1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]]);
        let b = [6.0, 5.0, 7.0, 10.0];
        let x = PivotedQr::new(&a).solve(&b);
        // normal equations: [[4,10],[10,30]] x = [28, 77]
        assert!((x[0] - 3.5).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn symmetric_eigen_of_small_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let (vals, vecs) = symmetric_eigen(&Matrix::<f64>::from_rows(&[[2.0, 1.0], [1.0, 2.0]]));
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!((vecs[(0, 0)].abs() - 0.5_f64.sqrt()).abs() < 1e-14);
        assert!((vecs[(0, 0)] - vecs[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn qr_flags_dependent_column() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 1.0], [1.0, 4.0, 2.0], [1.0, 6.0, 3.0], [1.0, 1.0, 0.5]]);
        let qr = PivotedQr::new(&a);
        assert_eq!(qr.rank(), 2);
        assert_eq!(qr.first_dependent_column(), Some(2));
    }

    #[test]
    fn gram_inverse_matches_explicit_inverse() {
        let a = Matrix::<f64>::from_rows(&[[1.0, 0.5], [1.0, 2.0], [1.0, -1.0], [1.0, 3.5]]);
        let g = a.transpose().matmul(&a);
        let inv = PivotedQr::new(&a).gram_inverse();
        let prod = g.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_reconstructs_matrix() {
        let a = Matrix::from_rows(&[[2.0, 0.0, 1.0], [1.0, 3.0, -1.0], [0.5, 0.5, 4.0], [1.0, -2.0, 0.0]]);
        for m in [a.clone(), a.transpose()] {
            let s = svd(&m);
            for w in s.singular_values.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let k = s.singular_values.len();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let v: f64 = (0..k).map(|j| s.u[(r, j)] * s.singular_values[j] * s.v[(c, j)]).sum();
                    assert!((v - m[(r, c)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let a: Matrix<f32> = Matrix::from_rows(&[[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]);
        let x = PivotedQr::new(&a).solve(&[2.0, 4.0, 6.0]);
        assert!(x[0].abs() < 1e-5 && (x[1] - 2.0).abs() < 1e-5);
    }
}
