//! Small dense linear algebra over [`Scalar`].
//!
//! The matrices in this crate are tiny (2x2 blocks, at most a few hundred
//! rows on the dense validation path), so a row-major `Vec` and a cyclic
//! Jacobi eigensolver cover everything needed.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::scalar::Scalar;

/// Fixed 2x2 matrix, used for the per-mode blocks.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn symmetric(diag0: T, off: T, diag1: T) -> Self {
        Self::new(diag0, off, off, diag1)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().flatten().all(|v| *v == T::zero())
    }

    pub fn max_abs(&self) -> T {
        self.m.iter().flatten().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (*self - *other).max_abs()
    }

    /// `v^T A v` for `v = (x, y)`.
    pub fn quad(&self, x: T, y: T) -> T {
        x * (self.m[0][0] * x + self.m[0][1] * y) + y * (self.m[1][0] * x + self.m[1][1] * y)
    }

    /// Eigen-decomposition of the symmetric part: ascending eigenvalues and
    /// unit eigenvectors `(cos a, sin a)`.
    pub fn sym_eigen(&self) -> ([T; 2], [[T; 2]; 2]) {
        let half = T::lit(0.5);
        let a = self.m[0][0];
        let d = self.m[1][1];
        let b = (self.m[0][1] + self.m[1][0]) * half;
        let mean = (a + d) * half;
        let radius = ((a - d) * half).hypot(b);
        // principal axis angle of the larger eigenvalue
        let theta = (b + b).atan2(a - d) * half;
        let (s, c) = theta.sin_cos();
        let big = [c, s];
        let small = [-s, c];
        ([mean - radius, mean + radius], [small, big])
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    pub fn from_diag(diag: &[T]) -> Self {
        Self::from_fn(diag.len(), diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| *v * s).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] = out.data[i * other.cols + j] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + *a * *b))
            .collect()
    }

    /// `v^T A v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        dot(v, &self.matvec(v))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    pub fn symmetrize(&self) -> Self {
        assert!(self.is_square());
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn asymmetry(&self) -> T {
        self.max_abs_diff(&self.transpose())
    }

    /// Writes `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat2<T>) {
        for i in 0..2 {
            for j in 0..2 {
                self[(r0 + i, c0 + j)] = block.m[i][j];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize) -> Mat2<T> {
        Mat2::new(self[(r0, c0)], self[(r0, c0 + 1)], self[(r0 + 1, c0)], self[(r0 + 1, c0 + 1)])
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, o: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, o: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, o: &Matrix<T>) -> Matrix<T> {
        self.matmul(o)
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Symmetric eigen-decomposition: ascending eigenvalues, eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymEigen<T> {
    /// Cyclic Jacobi rotations on the symmetric part of `a`.
    pub fn new(a: &Matrix<T>) -> Self {
        assert!(a.is_square(), "eigen-decomposition needs a square matrix");
        let n = a.rows();
        let mut w = a.symmetrize();
        let mut v = Matrix::identity(n);
        let scale = w.max_abs();
        let tiny = T::epsilon() * T::epsilon() * scale * scale;

        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + w[(p, q)] * w[(p, q)];
                }
            }
            if off <= tiny {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = w[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = w[(p, p)];
                    let aqq = w[(q, q)];
                    let theta = (aqq - app) / (apq + apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let wkp = w[(k, p)];
                        let wkq = w[(k, q)];
                        w[(k, p)] = c * wkp - s * wkq;
                        w[(k, q)] = s * wkp + c * wkq;
                    }
                    for k in 0..n {
                        let wpk = w[(p, k)];
                        let wqk = w[(q, k)];
                        w[(p, k)] = c * wpk - s * wqk;
                        w[(q, k)] = s * wpk + c * wqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| w[(i, i)].partial_cmp(&w[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| w[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    /// `V f(Λ) V^T`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| acc + self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)])
        })
    }
}

/// Result of a cutoff pseudo-inverse of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct PseudoInverse<T> {
    pub inverse: Matrix<T>,
    /// Orthonormal basis of the discarded eigenspace (columns).
    pub null_space: Vec<Vec<T>>,
}

/// Eigendecomposition pseudo-inverse discarding eigenvalues below
/// `rel_cutoff * λ_max`.
pub fn sym_pseudo_inverse<T: Scalar>(a: &Matrix<T>, rel_cutoff: T) -> PseudoInverse<T> {
    let eig = SymEigen::new(a);
    let lmax = eig.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let cut = lmax * rel_cutoff;
    let null_space = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, l)| l.abs() <= cut)
        .map(|(k, _)| eig.vectors.column(k))
        .collect();
    let inverse = eig.map(|l| if l.abs() <= cut { T::zero() } else { T::one() / l });
    PseudoInverse { inverse, null_space }
}

/// Inverse of a symmetric positive-definite matrix, `None` if any eigenvalue
/// is not strictly positive relative to the largest.
pub fn spd_inverse<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let eig = SymEigen::new(a);
    let lmax = eig.max();
    if !(lmax > T::zero()) || eig.min() <= lmax * T::rel_cutoff() {
        return None;
    }
    Some(eig.map(|l| T::one() / l))
}

/// Principal square root of a symmetric PSD matrix (negative rounding
/// residue is clamped to zero).
pub fn spd_sqrt<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    SymEigen::new(a).map(|l| l.max(T::zero()).sqrt())
}

/// Rows of `b` replaced by the orthonormal rows `(B B^T)^{-1/2} B`.
///
/// This is the symmetric (Löwdin) normalization, so the row span is kept.
pub fn orthonormalize_rows<T: Scalar>(b: &Matrix<T>) -> Option<Matrix<T>> {
    let gram = b.matmul(&b.transpose());
    let eig = SymEigen::new(&gram);
    let lmax = eig.max();
    if !(lmax > T::zero()) || eig.min() <= lmax * T::rel_cutoff() {
        return None;
    }
    Some(eig.map(|l| T::one() / l.sqrt()).matmul(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
        let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (&a + &a.transpose()).scale(0.5)
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..12 {
            let a = random_sym(&mut rng, n);
            let eig = SymEigen::new(&a);
            assert!(eig.map(|l| l).max_abs_diff(&a) < 1e-12);
            let vtv = eig.vectors.transpose().matmul(&eig.vectors);
            assert!(vtv.max_abs_diff(&Matrix::identity(n)) < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn mat2_eigen_agrees_with_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (a, b, d): (f64, f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let m2 = Mat2::symmetric(a, b, d);
            let (vals, vecs) = m2.sym_eigen();
            let dense = Matrix::from_rows(&[vec![a, b], vec![b, d]]);
            let eig = SymEigen::new(&dense);
            assert!((vals[0] - eig.values[0]).abs() < 1e-12);
            assert!((vals[1] - eig.values[1]).abs() < 1e-12);
            for k in 0..2 {
                let v = vecs[k];
                assert!((m2.quad(v[0], v[1]) - vals[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_reports_null_space() {
        // rank-one: (1, 1)(1, 1)^T
        let a = Matrix::from_rows(&[vec![1.0_f64, 1.0], vec![1.0, 1.0]]);
        let p = sym_pseudo_inverse(&a, 1e-12);
        assert_eq!(p.null_space.len(), 1);
        let nv = &p.null_space[0];
        assert!((nv[0] + nv[1]).abs() < 1e-12);
        assert!(p.inverse.max_abs_diff(&a.scale(0.25)) < 1e-12);
        assert!(spd_inverse(&a).is_none());
    }

    #[test]
    fn orthonormalized_rows_span_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Matrix::from_fn(3, 6, |_, _| rng.gen_range(-1.0..1.0));
        let s = orthonormalize_rows(&b).unwrap();
        assert!(s.matmul(&s.transpose()).max_abs_diff(&Matrix::identity(3)) < 1e-12);
        // projecting b onto span(s) leaves it unchanged
        let proj = s.transpose().matmul(&s);
        assert!(b.matmul(&proj).max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Matrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &a.matmul(&a.transpose()) + &Matrix::identity(4);
        let r = spd_sqrt(&spd);
        assert!(r.matmul(&r).max_abs_diff(&spd) < 1e-12);
        let inv = spd_inverse(&spd).unwrap();
        assert!(inv.matmul(&spd).max_abs_diff(&Matrix::identity(4)) < 1e-12);
    }
}
