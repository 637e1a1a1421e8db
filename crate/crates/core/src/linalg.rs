//! Dense row-major matrices and the symmetric positive-definite solves the
//! regularized least-squares step needs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{axpy, dot_slice};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape { expected: rows * cols, actual: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape { expected: self.cols, actual: x.len() });
        }
        Ok((0..self.rows).map(|i| dot_slice(self.row(i), x)).collect())
    }

    /// `Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Shape { expected: self.rows, actual: y.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), &mut out);
            }
        }
        Ok(out)
    }

    /// `A Aᵀ + shift·I` (rows × rows).
    pub fn gram_rows(&self, shift: f64) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            let ri = self.row(i);
            for j in 0..=i {
                let v = dot_slice(ri, self.row(j));
                g.data[i * n + j] = v;
                g.data[j * n + i] = v;
            }
            g.data[i * n + i] += shift;
        }
        g
    }

    /// `Aᵀ A + shift·I` (cols × cols).
    pub fn gram_cols(&self, shift: f64) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let dst = &mut g.data[i * n..i * n + i + 1];
                axpy(ri, &row[..=i], dst);
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[j * n + i] = g.data[i * n + j];
            }
            g.data[i * n + i] += shift;
        }
        g
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Shape { expected: a.rows, actual: a.cols });
        }
        let n = a.rows;
        let mut l = a.data.clone();
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        for j in 0..n {
            let lj: Vec<f64> = l[j * n..j * n + j].to_vec();
            let d = l[j * n + j] - dot_slice(&lj, &lj);
            if !(d > 1e-14 * scale) || !d.is_finite() {
                return Err(Error::SingularSystem);
            }
            let djj = libm::sqrt(d);
            l[j * n + j] = djj;
            for i in j + 1..n {
                let row_i = &mut l[i * n..i * n + n];
                row_i[j] = (row_i[j] - dot_slice(&row_i[..j], &lj)) / djj;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                l[i * n + j] = 0.0;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Shape { expected: n, actual: b.len() });
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (y[i] - dot_slice(row, &y[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        Ok(y)
    }
}
