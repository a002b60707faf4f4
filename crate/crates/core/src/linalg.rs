//! Small dense row-major matrices and a one-sided Jacobi SVD.
//!
//! Everything here is sized for per-partition work (a few thousand rows, tens
//! of columns), so the kernels are plain loops with no blocking.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch("data length != rows * cols"));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from row slices; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero; an empty-column matrix has no data anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch("matmul inner dimensions"));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(other.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch("t_matmul row counts"));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &aki) in self.row(k).iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                for (oj, &bkj) in out.row_mut(i).iter_mut().zip(b) {
                    *oj += aki * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch("matmul_t column counts"));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out[(i, j)] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch("sub"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        if self.rows == 0 {
            return m;
        }
        for r in self.iter_rows() {
            for (mi, x) in m.iter_mut().zip(r) {
                *mi += x;
            }
        }
        let n = self.rows as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }

    /// Subtracts `v` from every row.
    pub fn center_by(&self, v: &[f64]) -> Matrix {
        let mut out = self.clone();
        for i in 0..out.rows {
            for (x, m) in out.row_mut(i).iter_mut().zip(v) {
                *x -= m;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Thin SVD `A = U diag(sigma) Vᵀ` of a square matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub sweeps: usize,
}

pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi SVD of a square matrix.
///
/// Singular values come out in descending order. Columns of `U` belonging to
/// (numerically) zero singular values are completed to an orthonormal basis,
/// so `U` is always orthogonal. Each column of `U` is signed so its
/// largest-magnitude entry is nonnegative, with `V` flipped to match.
pub fn svd_jacobi(a: &Matrix) -> Result<Svd> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch("jacobi svd expects a square matrix"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..n {
                    let (up, uq) = (u[(k, p)], u[(k, q)]);
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == 0.0 || libm::fabs(gamma) <= JACOBI_TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for k in 0..n {
                        let (xp, xq) = (m[(k, p)], m[(k, q)]);
                        m[(k, p)] = c * xp - s * xq;
                        m[(k, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n)
        .map(|j| libm::sqrt((0..n).map(|k| u[(k, j)] * u[(k, j)]).sum::<f64>()))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let (u_raw, v_raw) = (u, v);
    let mut u = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    let sorted: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            u[(k, dst)] = u_raw[(k, src)];
            v[(k, dst)] = v_raw[(k, src)];
        }
    }
    sigma = sorted;

    let cutoff = sigma.first().copied().unwrap_or(0.0) * (n as f64) * f64::EPSILON;
    let mut rank = 0;
    for j in 0..n {
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            for k in 0..n {
                u[(k, j)] /= sigma[j];
            }
            rank += 1;
        } else {
            sigma[j] = 0.0;
        }
    }
    complete_basis(&mut u, rank);

    for j in 0..n {
        let mut best = 0;
        for k in 1..n {
            if libm::fabs(u[(k, j)]) > libm::fabs(u[(best, j)]) {
                best = k;
            }
        }
        if n > 0 && u[(best, j)] < 0.0 {
            for k in 0..n {
                u[(k, j)] = -u[(k, j)];
                v[(k, j)] = -v[(k, j)];
            }
        }
    }
    Ok(Svd { u, sigma, v, sweeps })
}

/// Fills columns `rank..n` of `u` with unit vectors orthogonal to the first
/// `rank` columns (Gram-Schmidt against the standard basis, done twice).
fn complete_basis(u: &mut Matrix, rank: usize) {
    let n = u.rows();
    let mut filled = rank;
    let mut e = 0;
    while filled < n && e < n {
        let mut cand = vec![0.0; n];
        cand[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for j in 0..filled {
                let proj: f64 = (0..n).map(|k| u[(k, j)] * cand[k]).sum();
                for (k, ck) in cand.iter_mut().enumerate() {
                    *ck -= proj * u[(k, j)];
                }
            }
        }
        let norm = libm::sqrt(dot(&cand, &cand));
        if norm > 1e-8 {
            for (k, ck) in cand.iter().enumerate() {
                u[(k, filled)] = ck / norm;
            }
            filled += 1;
        }
    }
}
