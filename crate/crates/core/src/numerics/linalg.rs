use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

const PIVOT_RTOL: f64 = 1e-13;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Build from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.concat() }
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols).map(|c| (0..self.rows).map(|r| self[(r, c)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Signed determinant. Exactly singular matrices give 0.
    pub fn det(&self) -> f64 {
        assert!(self.is_square(), "det of a non-square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap_or(k);
            if a[p * n + k] == 0.0 {
                return 0.0;
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                det = -det;
            }
            let piv = a[k * n + k];
            det *= piv;
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[i * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        det
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Result<Lu> {
        if !self.is_square() {
            return Err(Error::domain(format!("LU needs a square matrix, got {}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let row_norms: Vec<f64> =
            (0..n).map(|r| self.row(r).iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap_or(k);
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a[k * n + k];
            let norm = row_norms[perm[k]];
            if !(piv.abs() > PIVOT_RTOL * norm) || !piv.is_finite() {
                return Err(Error::Singular { pivot: k, context: "LU factorisation".into() });
            }
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                for c in k + 1..n {
                    a[i * n + c] -= f * a[k * n + c];
                }
            }
        }
        Ok(Lu { n, lu: a, perm, sign })
    }

    /// Solve `self * X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let lu = self.lu()?;
        if rhs.rows != self.rows {
            return Err(Error::domain("right-hand side has the wrong number of rows"));
        }
        let mut out = Matrix::zeros(rhs.rows, rhs.cols);
        for c in 0..rhs.cols {
            let x = lu.solve_vec(&rhs.col(c));
            for r in 0..rhs.rows {
                out[(r, c)] = x[r];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.rows))
    }

    /// `||A||_1 ||A^{-1}||_1`.
    pub fn condition_estimate(&self) -> Result<f64> {
        Ok(self.norm1() * self.inverse()?.norm1())
    }
}

/// Packed LU factors with row permutation.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn det(&self) -> f64 {
        (0..self.n).fold(self.sign, |d, k| d * self.lu[k * self.n + k])
    }

    /// `(sign, ln|det|)`.
    pub fn log_det(&self) -> (f64, f64) {
        let mut sign = self.sign;
        let mut log = 0.0;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            sign *= d.signum();
            log += d.abs().ln();
        }
        (sign, log)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[i * n + k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.lu[i * n + k] * y[k];
            }
            y[i] /= self.lu[i * n + i];
        }
        y
    }

    /// Solve `A^T x = b`.
    pub fn solve_transposed_vec(&self, b: &[f64]) -> Vec<f64> {
        // A = P^T L U, so A^T = U^T L^T P.
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.lu[k * n + i] * z[k];
            }
            z[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= self.lu[k * n + i] * z[k];
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::vandermonde;
    use proptest::prelude::*;

    #[test]
    fn det_examples() {
        assert_eq!(Matrix::identity(3).det(), 1.0);
        assert!((Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).det() - 1.0).abs() < 1e-15);
        let x: [f64; 3] = [0.1, 0.4, 0.9];
        let v = Matrix::from_fn(3, 3, |i, j| x[j].powi(i as i32));
        assert!((v.det() - vandermonde(&x)).abs() < 1e-12 * vandermonde(&x).abs());
    }

    #[test]
    fn singular_is_reported_with_pivot() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        match m.solve(&Matrix::identity(2)) {
            Err(Error::Singular { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert_eq!(m.det(), 0.0);
    }

    #[test]
    fn solve_residual_is_small() {
        let m = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, -0.2], vec![0.5, -0.2, 2.0]]);
        let rhs = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, -1.0]]);
        let x = m.solve(&rhs).unwrap();
        let back = m.matmul(&x);
        assert!(back.max_abs_diff(&rhs) < 1e-12);
        let lu = m.lu().unwrap();
        let xt = lu.solve_transposed_vec(&[1.0, 2.0, 3.0]);
        let check = m.transpose().mat_vec(&xt);
        for (c, e) in check.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - e).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn det_of_transpose(entries in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let m = Matrix::from_fn(4, 4, |i, j| entries[4 * i + j]);
            let d = m.det();
            prop_assert!((d - m.transpose().det()).abs() <= 1e-12 * (1.0 + d.abs()));
        }

        #[test]
        fn det_of_vandermonde_matrix(
            jitter in proptest::collection::vec(0.0f64..0.5, 2..=6),
            shift in 0usize..6,
        ) {
            // one node per cell of a uniform grid on [-1.5, 1.5], in rotated order
            let n = jitter.len();
            let cell = 3.0 / n as f64;
            let mut x: Vec<f64> = jitter.iter().enumerate().map(|(k, u)| -1.5 + (k as f64 + u) * cell).collect();
            x.rotate_left(shift % n);
            let m = Matrix::from_fn(n, n, |i, j| x[j].powi(i as i32));
            let v = vandermonde(&x);
            prop_assert!((m.det() - v).abs() <= 1e-10 * (v.abs() + 1e-12));
        }
    }
}
