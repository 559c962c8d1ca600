//! Small dense linear algebra: a row-major matrix plus the factorizations the
//! estimators need (Householder least squares, LU for square systems).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reciprocal-condition cutoff below which a design is declared singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major storage.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix storage has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Single-column matrix.
    pub fn column_vector(v: &[T]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        self.rows().map(|r| dot(r, v)).collect()
    }

    /// `self' * v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &vi) in self.rows().zip(v) {
            for (o, &x) in out.iter_mut().zip(r) {
                *o += x * vi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Returns `None` when a pivot is exactly zero or below `tiny` relative to
    /// the largest entry of its column.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.as_slice().iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if scale == T::zero() && n > 0 {
            return None;
        }
        let tiny = scale * T::epsilon() * T::lit(16.0);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return None;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= u * xk;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.perm.len();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves the square system `a x = b`, failing with a singular-design error.
pub fn solve_square<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let lu = Lu::new(a).ok_or(Error::SingularDesign {
        rcond: 0.0,
        tolerance: SINGULAR_RCOND,
    })?;
    Ok(lu.solve(b))
}

/// Householder QR least squares for `min ||a x - b||` with column
/// equilibration. Also reports the reciprocal 1-norm condition estimate of
/// the (equilibrated) normal matrix `a'a`, computed as `rcond(R)^2`.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub solution: Vec<T>,
    pub rcond: T,
}

pub fn least_squares<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<LeastSquares<T>> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(Error::invalid(format!(
            "least squares needs at least {n} rows, got {m}"
        )));
    }
    // Unit column norms keep the condition estimate scale-free.
    let mut scale = vec![T::one(); n];
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = (0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::SingularDesign {
                rcond: 0.0,
                tolerance: SINGULAR_RCOND,
            });
        }
        *s = norm;
    }
    let mut r = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            r[(i, j)] = a[(i, j)] / scale[j];
        }
    }
    let mut qtb = b.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::SingularDesign {
                rcond: 0.0,
                tolerance: SINGULAR_RCOND,
            });
        }
        let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 > T::zero() {
            for j in k..n {
                let s: T = (k..m).zip(&v).map(|(i, &vi)| vi * r[(i, j)]).sum();
                let f = (s + s) / vnorm2;
                for (i, &vi) in (k..m).zip(&v) {
                    r[(i, j)] -= f * vi;
                }
            }
            let s: T = (k..m).zip(&v).map(|(i, &vi)| vi * qtb[i]).sum();
            let f = (s + s) / vnorm2;
            for (i, &vi) in (k..m).zip(&v) {
                qtb[i] -= f * vi;
            }
        }
    }
    let mut upper = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            upper[(i, j)] = r[(i, j)];
        }
    }
    let rinv = match upper_triangular_inverse(&upper) {
        Some(inv) => inv,
        None => {
            return Err(Error::SingularDesign {
                rcond: 0.0,
                tolerance: SINGULAR_RCOND,
            })
        }
    };
    let rc = T::one() / (upper.norm_one() * rinv.norm_one());
    let rcond = rc * rc;
    if !(rcond.as_f64() >= SINGULAR_RCOND) {
        return Err(Error::SingularDesign {
            rcond: rcond.as_f64(),
            tolerance: SINGULAR_RCOND,
        });
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = qtb[i];
        for j in i + 1..n {
            s -= upper[(i, j)] * x[j];
        }
        x[i] = s / upper[(i, i)];
    }
    for (xi, s) in x.iter_mut().zip(&scale) {
        *xi /= *s;
    }
    Ok(LeastSquares { solution: x, rcond })
}

fn upper_triangular_inverse<T: Real>(u: &Matrix<T>) -> Option<Matrix<T>> {
    let n = u.nrows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        if u[(j, j)] == T::zero() {
            return None;
        }
        inv[(j, j)] = T::one() / u[(j, j)];
        for i in (0..j).rev() {
            let mut s = T::zero();
            for k in i + 1..=j {
                s += u[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / u[(i, i)];
        }
    }
    Some(inv)
}
