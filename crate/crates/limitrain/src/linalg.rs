//! Minimal dense linear algebra for the small systems in this crate.
//!
//! Plant state dimensions here never exceed five, so a row-major `Vec<f64>`
//! matrix with straightforward loops is all that is needed. Keeping the
//! arithmetic in one place also fixes the accumulation order, which the
//! determinism and plant/imitator-equivalence contracts rely on.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::Dimension("matrix needs at least one row".into()));
        }
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling-and-squaring with a truncated
    /// Taylor series (absolute series tolerance 1e-14).
    pub fn expm(&self) -> Mat {
        assert_eq!(self.rows, self.cols, "expm needs a square matrix");
        const TOL: f64 = 1e-14;
        // Scale so the series argument has small norm.
        let norm = self.inf_norm();
        let squarings = if norm <= 0.5 {
            0
        } else {
            (norm / 0.5).log2().ceil() as u32
        };
        let scaled = self.scale(0.5f64.powi(squarings as i32));

        let n = self.rows;
        let mut sum = Mat::identity(n);
        let mut term = Mat::identity(n);
        for k in 1..200 {
            term = term.mul(&scaled).scale(1.0 / k as f64);
            sum = sum.add(&term);
            if term.max_abs() <= TOL {
                break;
            }
        }
        let mut result = sum;
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matmul_and_transpose() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let ab = a.mul(&b);
        assert_eq!(ab.row(0), &[2.0, 1.0]);
        assert_eq!(ab.row(1), &[4.0, 3.0]);
        let at = a.transpose();
        assert_eq!(at.row(0), &[1.0, 3.0]);
        assert_eq!(at.matvec(&[1.0, 1.0]), vec![4.0, 6.0]);
    }

    #[test]
    fn expm_diagonal() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let e = a.expm();
        assert_relative_eq!(e.at(0, 0), 1f64.exp(), max_relative = 1e-13);
        assert_relative_eq!(e.at(1, 1), (-2f64).exp(), max_relative = 1e-13);
        assert_eq!(e.at(0, 1), 0.0);
    }

    #[test]
    fn expm_nilpotent() {
        // exp([[0,1],[0,0]]) = [[1,1],[0,1]] exactly.
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = a.expm();
        assert_eq!(e.at(0, 0), 1.0);
        assert_eq!(e.at(0, 1), 1.0);
        assert_eq!(e.at(1, 0), 0.0);
        assert_eq!(e.at(1, 1), 1.0);
    }

    #[test]
    fn expm_rotation() {
        // exp([[0,-t],[t,0]]) is the rotation by angle t.
        let t = 0.7;
        let a = Mat::from_rows(&[vec![0.0, -t], vec![t, 0.0]]).unwrap();
        let e = a.expm();
        assert_relative_eq!(e.at(0, 0), t.cos(), epsilon = 1e-14);
        assert_relative_eq!(e.at(1, 0), t.sin(), epsilon = 1e-14);
        assert_relative_eq!(e.at(0, 1), -t.sin(), epsilon = 1e-14);
    }

    #[test]
    fn expm_large_norm_scales() {
        // Stiff diagonal entry exercises the squaring path.
        let a = Mat::from_rows(&[vec![-50.0, 0.0], vec![0.0, -0.1]]).unwrap();
        let e = a.expm();
        assert_relative_eq!(e.at(0, 0), (-50f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(e.at(1, 1), (-0.1f64).exp(), max_relative = 1e-13);
    }
}
