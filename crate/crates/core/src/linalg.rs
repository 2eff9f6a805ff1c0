//! Small dense linear algebra over [`Scalar`].
//!
//! Everything here targets the tiny matrices that show up in mixture
//! modelling (d×d covariances, N×d data matrices with small d), so the
//! algorithms favour robustness over asymptotic speed: Cholesky for SPD
//! solves, cyclic Jacobi for symmetric eigenproblems and one-sided
//! (Hestenes) Jacobi for singular values.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
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
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Build from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Convenience for literals in tests and examples.
    pub fn from_f64_rows<const C: usize>(rows: &[[f64; C]]) -> Self {
        let data = rows.iter().flat_map(|r| r.iter().map(|&v| T::of(v))).collect();
        Self { rows: rows.len(), cols: C, data }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.row_iter().map(<[T]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: rhs.rows });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if self.cols != x.len() {
            return Err(Error::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetrized(&self) -> Self {
        debug_assert!(self.is_square());
        let half = T::of(0.5);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = (self[(i, j)] + self[(j, i)]) * half;
            }
        }
        s
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `A + shift·I`
    pub fn add_identity(&self, shift: T) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows.min(self.cols) {
            s[(i, i)] += shift;
        }
        s
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * factor).collect() }
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
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

// Serialized as nested rows, `[[a, b], [c, d]]`.
impl<T: Scalar> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
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

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Fails when a pivot is not strictly positive (matrix not PD).
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::CovarianceNotPd);
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// `ln |A| = 2 Σ ln L_jj`
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.l.rows()).map(|j| self.l[(j, j)].ln()).sum::<T>() * two
    }

    /// Solves `L z = b` by forward substitution.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        let mut z = vec![T::zero(); n];
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[(i, k)] * z[k];
            }
            z[i] = v / self.l[(i, i)];
        }
        z
    }

    /// `xᵀ A⁻¹ x = ‖L⁻¹ x‖²`
    pub fn quad_form(&self, x: &[T]) -> T {
        let z = self.forward(x);
        dot(&z, &z)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let z = self.forward(b);
        let n = self.l.rows();
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut v = z[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        x
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymEigen<T> {
    /// Cyclic Jacobi rotations on the symmetrized input.
    pub fn new(a: &Matrix<T>) -> Self {
        let n = a.rows();
        let mut m = a.symmetrized();
        let mut v = Matrix::identity(n);
        let two = T::of(2.0);
        for _sweep in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)] * m[(i, j)])
                .sum();
            let scale: T = m.as_slice().iter().map(|&x| x * x).sum();
            if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
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
        order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            for k in 0..n {
                vectors[(k, dst)] = v[(k, src)];
            }
        }
        Self { values, vectors }
    }

    pub fn min_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn vector(&self, j: usize) -> Vec<T> {
        (0..self.vectors.rows()).map(|k| self.vectors[(k, j)]).collect()
    }

    /// `V f(Λ) Vᵀ`
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (j, &lambda) in self.values.iter().enumerate() {
            let fl = f(lambda);
            for a in 0..n {
                for b in 0..n {
                    out[(a, b)] += self.vectors[(a, j)] * fl * self.vectors[(b, j)];
                }
            }
        }
        out
    }
}

/// `A^{-1/2}` of an SPD matrix.
pub fn inv_sqrt_spd<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let eig = SymEigen::new(a);
    if !(eig.min_value() > T::zero()) {
        return Err(Error::CovarianceNotPd);
    }
    Ok(eig.map_values(|l| T::one() / l.sqrt()))
}

/// Singular values, descending, by one-sided Jacobi orthogonalisation of the
/// columns (works on the thinner side of the matrix).
pub fn singular_values<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    let work = if m.cols() > m.rows() { m.transpose() } else { m.clone() };
    let (rows, cols) = (work.rows(), work.cols());
    // Column-major copy so rotations touch contiguous memory.
    let mut colv: Vec<Vec<T>> = (0..cols).map(|j| (0..rows).map(|i| work[(i, j)]).collect()).collect();
    let tol = T::epsilon() * T::of(rows as f64).sqrt();
    let two = T::of(2.0);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&colv[p], &colv[p]);
                let beta = dot(&colv[q], &colv[q]);
                let gamma = dot(&colv[p], &colv[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = colv.split_at_mut(q);
                for (a, b) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = c * x - s * y;
                    *b = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = colv.iter().map(|c| norm(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_two_by_two() {
        let a = Matrix::<f64>::from_f64_rows(&[[4.0, 2.0], [2.0, 3.0]]);
        let ch = Cholesky::new(&a).unwrap();
        // |A| = 12 - 4 = 8
        assert!((ch.log_det() - 8f64.ln()).abs() < 1e-14);
        let x = ch.solve(&[1.0, 2.0]);
        // A⁻¹ = [[3, -2], [-2, 4]] / 8
        assert!((x[0] - (3.0 - 4.0) / 8.0).abs() < 1e-14);
        assert!((x[1] - (-2.0 + 8.0) / 8.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::<f64>::from_f64_rows(&[[1.0, 0.0], [0.0, -0.5]]);
        assert!(matches!(Cholesky::new(&a), Err(Error::CovarianceNotPd)));
        let singular = Matrix::<f64>::from_f64_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert!(Cholesky::new(&singular).is_err());
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = Matrix::<f64>::from_f64_rows(&[[2.0, -1.0, 0.5], [-1.0, 3.0, 0.25], [0.5, 0.25, 1.0]]);
        let e = SymEigen::new(&a);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = e.map_values(|l| l);
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let a = Matrix::<f64>::from_f64_rows(&[[1.0, 0.98], [0.98, 1.0]]);
        let g = inv_sqrt_spd(&a).unwrap();
        let g2a = g.matmul(&g).unwrap().matmul(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g2a[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = Matrix::<f64>::from_diag(&[0.1, 10.0]);
        let sv = singular_values(&m);
        assert!((sv[0] - 10.0).abs() < 1e-14 && (sv[1] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn serde_nested_rows() {
        let m = Matrix::<f64>::from_f64_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: Matrix<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Matrix<f64>>("[[1.0],[2.0,3.0]]").is_err());
    }
}
