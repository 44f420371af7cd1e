//! Small dense linear algebra: just enough for p×p normal equations, Newton
//! steps and Gram matrices. `p` is the number of regression coefficients, so
//! every routine here is cubic in a handful of columns at most.

use std::ops::{Index, IndexMut};

use crate::error::{ModeError, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ModeError::dim("ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ModeError::dim(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Matrix<T> {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for i in 0..self.rows {
            add_outer(&mut g, self.row(i), T::one());
        }
        g
    }

    /// `Aᵀv`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn scale(&mut self, c: T) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
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
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `m += w · v vᵀ`.
pub fn add_outer<T: Scalar>(m: &mut Matrix<T>, v: &[T], w: T) {
    let p = v.len();
    for a in 0..p {
        let va = v[a] * w;
        for b in 0..p {
            m[(a, b)] += va * v[b];
        }
    }
}

fn rank_tolerance<T: Scalar>(scale: T, dim: usize) -> T {
    scale * T::of_usize(dim.max(1)) * T::epsilon() * T::of(16.0)
}

/// Solves `A x = b` for square `A` by Gaussian elimination with partial
/// pivoting. Fails with `RankDeficient` when a pivot collapses.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(ModeError::dim(format!(
            "solve: {}x{} system with rhs of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let tol = rank_tolerance(m.max_abs(), n);
    for k in 0..n {
        let (piv, piv_abs) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, T::neg_infinity()), |best, c| if c.1 > best.1 { c } else { best });
        if !(piv_abs > tol) {
            return Err(ModeError::RankDeficient { rank: k, cols: n });
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            rhs.swap(k, piv);
        }
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let t = m[(k, j)];
                m[(i, j)] -= f * t;
            }
            let t = rhs[k];
            rhs[i] -= f * t;
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let s = (k + 1..n).fold(rhs[k], |s, j| s - m[(k, j)] * x[j]);
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}

/// Numerical column rank by Gaussian elimination with complete pivoting,
/// after scaling every column to unit max-norm.
pub fn column_rank<T: Scalar>(a: &Matrix<T>) -> usize {
    let (n, p) = (a.rows(), a.cols());
    let mut m = a.clone();
    for j in 0..p {
        let s = (0..n).fold(T::zero(), |s, i| s.max(m[(i, j)].abs()));
        if s > T::zero() {
            for i in 0..n {
                m[(i, j)] /= s;
            }
        }
    }
    let tol = rank_tolerance(T::one(), n.max(p));
    let mut row_perm: Vec<usize> = (0..n).collect();
    let mut col_perm: Vec<usize> = (0..p).collect();
    let mut rank = 0;
    for k in 0..n.min(p) {
        let mut best = (k, k, T::zero());
        for ii in k..n {
            for jj in k..p {
                let v = m[(row_perm[ii], col_perm[jj])].abs();
                if v > best.2 {
                    best = (ii, jj, v);
                }
            }
        }
        if !(best.2 > tol) {
            break;
        }
        row_perm.swap(k, best.0);
        col_perm.swap(k, best.1);
        let (pr, pc) = (row_perm[k], col_perm[k]);
        let pv = m[(pr, pc)];
        for &r in &row_perm[k + 1..] {
            let f = m[(r, pc)] / pv;
            if f == T::zero() {
                continue;
            }
            for &c in &col_perm[k..] {
                let t = m[(pr, c)];
                m[(r, c)] -= f * t;
            }
        }
        rank += 1;
    }
    rank
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let n = a.rows();
    let mut m = a.clone();
    let two = T::of(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= T::epsilon() * T::epsilon() * m.max_abs().powi(2) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}
