//! Cholesky factorization for the symmetric positive definite systems that
//! show up in every solver step (`E^T E + mu I`, `A A^T + mu I`,
//! `mu1 I + mu2 D^T D`).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower-triangular factor `L` with `M = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(m: &Matrix) -> Result<Self> {
        let (n, c) = m.shape();
        if n != c {
            return Err(Error::dims("cholesky", (n, n), (n, c)));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: d,
                    condition: diagonal_condition_estimate(m),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor_l(&self) -> &Matrix {
        &self.l
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let l = &self.l;
        // forward: L y = b
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[(i, k)] * b[k];
            }
            b[i] = s / l[(i, i)];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let col = l.col(i);
            let mut s = b[i];
            for k in i + 1..n {
                s -= col[k] * b[k];
            }
            b[i] = s / col[i];
        }
    }

    /// Solves `M X = B` column by column.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.dim(), "cholesky solve: rhs rows");
        let mut x = b.clone();
        for j in 0..x.cols() {
            self.solve_in_place(x.col_mut(j));
        }
        x
    }

    /// Explicit symmetric inverse.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let inv = self.solve(&Matrix::identity(n));
        Matrix::from_fn(n, n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)]))
    }

    /// Cheap condition estimate `(max l_ii / min l_ii)^2`.
    pub fn condition_estimate(&self) -> f64 {
        let diag: Vec<f64> = (0..self.dim()).map(|i| self.l[(i, i)]).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }
}

fn diagonal_condition_estimate(m: &Matrix) -> f64 {
    let n = m.rows();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
