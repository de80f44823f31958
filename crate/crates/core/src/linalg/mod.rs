//! Dense row-major matrices, the norms used by the decomposition objective,
//! and a one-sided Jacobi SVD.

mod svd;
pub mod text;

pub use svd::{svd, Svd};

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {op} of {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// A dense `f64` matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::BadLength {
                    rows: rows.len(),
                    cols,
                    len: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }

    /// Returns the first non-finite entry, if any.
    pub fn check_finite(&self) -> Result<(), LinalgError> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(k) => Err(LinalgError::NonFinite {
                row: k / self.cols.max(1),
                col: k % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product. Each output entry accumulates over the inner index in
    /// ascending order, so results equal the textbook triple loop exactly.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, p) = (self.rows, other.cols);
        let mut out = DenseMatrix::zeros(n, p);
        for i in 0..n {
            let out_row = &mut out.data[i * p..(i + 1) * p];
            for (k, &a) in self.row(i).iter().enumerate() {
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(
        &self,
        other: &DenseMatrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix, LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    /// Largest absolute entry difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn frobenius_norm(x: &DenseMatrix) -> f64 {
    // scaled accumulation avoids overflow on large entries
    let scale = linf_norm(x);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = x.data.iter().map(|&v| (v / scale) * (v / scale)).sum();
    scale * sum.sqrt()
}

/// Entrywise l1 norm, the sum of absolute values.
pub fn l1_norm(x: &DenseMatrix) -> f64 {
    x.data.iter().map(|v| v.abs()).sum()
}

/// Largest absolute entry.
pub fn linf_norm(x: &DenseMatrix) -> f64 {
    x.data.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest singular value.
pub fn spectral_norm(x: &DenseMatrix) -> Result<f64, LinalgError> {
    Ok(svd(x)?.sigma.first().copied().unwrap_or(0.0))
}

/// Sum of singular values.
pub fn nuclear_norm(x: &DenseMatrix) -> Result<f64, LinalgError> {
    Ok(svd(x)?.sigma.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_small_matrix() {
        let x = DenseMatrix::from_rows(&[[1.0, -2.0], [0.0, 3.0]]).unwrap();
        assert_eq!(l1_norm(&x), 6.0);
        assert_eq!(linf_norm(&x), 3.0);
        assert!((frobenius_norm(&x) - 14f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frobenius_of_identity_is_sqrt_n() {
        for n in [1, 4, 9, 17] {
            let f = frobenius_norm(&DenseMatrix::identity(n));
            assert!((f - (n as f64).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_and_nuclear_of_diagonal() {
        let d = DenseMatrix::from_diag(&[3.0, 1.0]);
        assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-14);
        assert!((nuclear_norm(&d).unwrap() - 4.0).abs() < 1e-14);
        assert!((nuclear_norm(&DenseMatrix::identity(3)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_unit_outer_product_has_unit_nuclear_norm() {
        let u = [0.6, 0.8, 0.0];
        let v = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
        let m = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        assert!((nuclear_norm(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_neutral_and_transpose_involutes() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 5.5);
        assert_eq!(a.matmul(&DenseMatrix::identity(3)).unwrap(), a);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn shape_errors() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(LinalgError::ShapeMismatch { .. })));
        assert!(a.add(&DenseMatrix::zeros(3, 2)).is_err());
        assert!(DenseMatrix::from_row_major(2, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn non_finite_located() {
        let mut a = DenseMatrix::zeros(2, 3);
        a[(1, 2)] = f64::NAN;
        assert_eq!(a.check_finite(), Err(LinalgError::NonFinite { row: 1, col: 2 }));
    }
}
