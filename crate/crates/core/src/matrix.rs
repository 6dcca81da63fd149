//! Minimal dense matrix support for the generator blocks and the oracle
//! solves. Row-major, binary64, no structure exploitation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Row sums as a vector.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Left-multiply a row vector: returns x * self.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += xi * self.get(i, j);
            }
        }
        out
    }
}

/// Solves A x = b in place by LU decomposition with partial pivoting.
/// `b` holds one right-hand side per column; the solution overwrites it.
pub fn lu_solve(a: &Matrix, b: &mut Matrix) -> Result<()> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.rows);
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut piv = k;
        let mut piv_val = lu.get(k, k).abs();
        for i in k + 1..n {
            let v = lu.get(i, k).abs();
            if v > piv_val {
                piv = i;
                piv_val = v;
            }
        }
        if piv_val == 0.0 || !piv_val.is_finite() {
            return Err(Error::SingularSystem);
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu.get(k, j);
                lu.set(k, j, lu.get(piv, j));
                lu.set(piv, j, tmp);
            }
            perm.swap(k, piv);
        }
        let diag = lu.get(k, k);
        for i in k + 1..n {
            let factor = lu.get(i, k) / diag;
            lu.set(i, k, factor);
            if factor == 0.0 {
                continue;
            }
            for j in k + 1..n {
                lu.add_to(i, j, -factor * lu.get(k, j));
            }
        }
    }

    let nrhs = b.cols;
    let mut x = Matrix::zeros(n, nrhs);
    for (i, &pi) in perm.iter().enumerate() {
        for j in 0..nrhs {
            x.set(i, j, b.get(pi, j));
        }
    }
    // forward substitution (unit lower)
    for i in 1..n {
        for k in 0..i {
            let l = lu.get(i, k);
            if l == 0.0 {
                continue;
            }
            for j in 0..nrhs {
                x.add_to(i, j, -l * x.get(k, j));
            }
        }
    }
    // back substitution
    for i in (0..n).rev() {
        for k in i + 1..n {
            let u = lu.get(i, k);
            if u == 0.0 {
                continue;
            }
            for j in 0..nrhs {
                x.add_to(i, j, -u * x.get(k, j));
            }
        }
        let d = lu.get(i, i);
        for j in 0..nrhs {
            x.set(i, j, x.get(i, j) / d);
        }
    }
    *b = x;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let mut a = Matrix::zeros(3, 3);
        let entries = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                a.set(i, j, entries[i][j]);
            }
        }
        let mut b = Matrix::zeros(3, 1);
        b.set(0, 0, 3.0);
        b.set(1, 0, 5.0);
        b.set(2, 0, 5.0);
        lu_solve(&a, &mut b).unwrap();
        let x: Vec<f64> = (0..3).map(|i| b.get(i, 0)).collect();
        // residual check
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| entries[i][j] * x[j]).sum();
            let expect = [3.0, 5.0, 5.0][i];
            assert!((r - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let mut a = Matrix::zeros(2, 2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 4.0);
        let mut b = Matrix::zeros(2, 1);
        b.set(0, 0, 1.0);
        assert!(matches!(lu_solve(&a, &mut b), Err(Error::SingularSystem)));
    }
}
