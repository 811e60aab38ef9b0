//! Closed-form least squares with a column sum-to-one constraint.
//!
//! For fixed `E`, `Y`, `S`, `L` and `mu > 0`, every column `a` of
//!
//! ```text
//! argmin_A  0.5 ||Y - E A||_F^2 + mu/2 ||S - A - L||_F^2   s.t.  1_r^T A = 1_n^T
//! ```
//!
//! is obtained by eliminating the multiplier from the bordered KKT system
//!
//! ```text
//! [ E^T E + mu I   1_r ] [ a  ]   [ E^T y + mu (s - l) ]
//! [ 1_r^T          0   ] [ nu ] = [ 1                  ]
//! ```
//!
//! which gives `A = (Q + Q 1 c 1^T Q) R - Q 1 c 1_n^T` with
//! `Q = (E^T E + mu I)^{-1}`, `c = -1 / (1^T Q 1)` and `R` the right-hand side.
//! Column by column that is `a = z + c (1^T z - 1) Q 1` where `z = Q r`.
//!
//! The current `A` does not enter the formula, so it is not a parameter.
//! [`kkt_oracle_solve`] assembles and solves the bordered system directly with
//! a general LU factorization and exists to cross-check [`quec_solve`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::matrix::{dot, AbundanceMatrix, Matrix};

/// Above this size `Q` is never formed; it is applied through the Cholesky
/// factor instead.
pub const EXPLICIT_Q_LIMIT: usize = 512;

const PAR_MIN_COLS: usize = 256;

#[derive(Debug, Clone)]
enum QRepr {
    Explicit(Matrix),
    Factored(Cholesky),
}

/// Reusable factors for a fixed `(E, mu)` pair.
#[derive(Debug, Clone)]
pub struct QuecFactors {
    repr: QRepr,
    mu: f64,
    c: f64,
    q1: Vec<f64>,
}

impl QuecFactors {
    /// Factors from a precomputed Gram matrix `E^T E`.
    pub fn from_gram(gram: &Matrix, mu: f64) -> Result<Self> {
        Self::from_gram_with_limit(gram, mu, EXPLICIT_Q_LIMIT)
    }

    pub(crate) fn from_gram_with_limit(gram: &Matrix, mu: f64, explicit_limit: usize) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::param("mu", format!("must be positive and finite, got {mu}")));
        }
        let r = gram.rows();
        if gram.cols() != r {
            return Err(Error::dims("quec gram", (r, r), gram.shape()));
        }
        if r == 0 {
            return Err(Error::Empty("quec system"));
        }
        let mut system = gram.clone();
        system.add_diagonal(mu);
        let chol = Cholesky::factor(&system)?;
        let mut q1 = vec![1.0; r];
        let repr = if r <= explicit_limit {
            let q = chol.inverse();
            q1 = q.columns().map(|c| c.iter().sum()).collect();
            QRepr::Explicit(q)
        } else {
            chol.solve_in_place(&mut q1);
            QRepr::Factored(chol)
        };
        let total: f64 = q1.iter().sum();
        let c = -1.0 / total;
        if !c.is_finite() || c >= 0.0 {
            return Err(Error::Singular("quec: 1^T Q 1 is not positive"));
        }
        Ok(Self { repr, mu, c, q1 })
    }

    /// Number of unknowns per column (`r`).
    pub fn dim(&self) -> usize {
        self.q1.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `c = -1 / (1^T Q 1)`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Cached `Q 1`.
    pub fn q1(&self) -> &[f64] {
        &self.q1
    }

    /// `Q` as a dense matrix. Formed on demand when only the factor is kept.
    pub fn q(&self) -> Matrix {
        match &self.repr {
            QRepr::Explicit(q) => q.clone(),
            QRepr::Factored(ch) => ch.inverse(),
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.repr, QRepr::Explicit(_))
    }

    /// Solves one column in place: `rhs` becomes the constrained minimizer.
    fn solve_column(&self, rhs: &[f64], out: &mut [f64]) {
        match &self.repr {
            QRepr::Explicit(q) => {
                // Q is symmetric, so row i of Q equals column i.
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dot(q.col(i), rhs);
                }
            }
            QRepr::Factored(ch) => {
                out.copy_from_slice(rhs);
                ch.solve_in_place(out);
            }
        }
        let s: f64 = out.iter().sum();
        let scale = self.c * (s - 1.0);
        for (o, &q) in out.iter_mut().zip(&self.q1) {
            *o += scale * q;
        }
    }
}

/// Builds factors for `Q = (E^T E + mu I)^{-1}`.
pub fn quec_factorize(e: &Matrix, mu: f64) -> Result<QuecFactors> {
    if !e.is_finite() {
        return Err(Error::param("E", "contains non-finite entries"));
    }
    QuecFactors::from_gram(&e.gram(), mu)
}

/// Applies the closed form to a right-hand side `E^T Y + mu (S - L)`.
///
/// Every column of the result sums to one up to roundoff.
pub fn quec_solve(factors: &QuecFactors, rhs: &Matrix) -> Result<AbundanceMatrix> {
    let r = factors.dim();
    if rhs.rows() != r {
        return Err(Error::dims("quec_solve rhs", (r, rhs.cols()), rhs.shape()));
    }
    let mut out = Matrix::zeros(r, rhs.cols());
    quec_solve_into(factors, rhs, &mut out);
    Ok(out)
}

/// In-place variant used by the solvers; shapes must already agree.
pub(crate) fn quec_solve_into(factors: &QuecFactors, rhs: &Matrix, out: &mut Matrix) {
    let r = factors.dim();
    debug_assert_eq!(rhs.shape(), out.shape());
    if r == 0 || rhs.cols() == 0 {
        return;
    }
    let src = rhs.as_slice();
    let dst = out.as_mut_slice();
    if rhs.cols() >= PAR_MIN_COLS {
        dst.par_chunks_mut(r)
            .zip(src.par_chunks(r))
            .with_min_len(64)
            .for_each(|(o, x)| factors.solve_column(x, o));
    } else {
        for (o, x) in dst.chunks_mut(r).zip(src.chunks(r)) {
            factors.solve_column(x, o);
        }
    }
}

/// `E^T Y + mu (S - L)`, the right-hand side expected by [`quec_solve`].
pub fn assemble_rhs(e: &Matrix, y: &Matrix, s: &Matrix, l: &Matrix, mu: f64) -> Result<Matrix> {
    let r = e.cols();
    if e.rows() != y.rows() {
        return Err(Error::dims("assemble_rhs: E vs Y", (y.rows(), r), e.shape()));
    }
    let shape = (r, y.cols());
    s.expect_shape("assemble_rhs: S", shape)?;
    l.expect_shape("assemble_rhs: L", shape)?;
    let mut rhs = e.t_matmul(y);
    rhs.axpy(mu, s);
    rhs.axpy(-mu, l);
    Ok(rhs)
}

/// Reference solution of the same problem through the dense bordered KKT
/// system, one pixel at a time with partial-pivot LU.
pub fn kkt_oracle_solve(y: &Matrix, e: &Matrix, s: &Matrix, l: &Matrix, mu: f64) -> Result<AbundanceMatrix> {
    kkt_oracle_solve_with_multipliers(y, e, s, l, mu).map(|(a, _)| a)
}

/// Like [`kkt_oracle_solve`] but also returns the per-pixel multipliers `nu`.
pub fn kkt_oracle_solve_with_multipliers(
    y: &Matrix,
    e: &Matrix,
    s: &Matrix,
    l: &Matrix,
    mu: f64,
) -> Result<(AbundanceMatrix, Vec<f64>)> {
    use nalgebra::{DMatrix, DVector};

    if !(mu > 0.0) {
        return Err(Error::param("mu", format!("must be positive, got {mu}")));
    }
    let rhs = assemble_rhs(e, y, s, l, mu)?;
    let r = e.cols();
    let n = y.cols();
    let mut kkt = DMatrix::<f64>::zeros(r + 1, r + 1);
    for i in 0..r {
        for j in 0..r {
            let g: f64 = e.col(i).iter().zip(e.col(j)).map(|(a, b)| a * b).sum();
            kkt[(i, j)] = g + if i == j { mu } else { 0.0 };
        }
        kkt[(i, r)] = 1.0;
        kkt[(r, i)] = 1.0;
    }
    let lu = kkt.lu();
    let mut a = Matrix::zeros(r, n);
    let mut nu = Vec::with_capacity(n);
    for j in 0..n {
        let mut b = DVector::<f64>::zeros(r + 1);
        for i in 0..r {
            b[i] = rhs[(i, j)];
        }
        b[r] = 1.0;
        let x = lu.solve(&b).ok_or(Error::Singular("bordered KKT system"))?;
        a.col_mut(j).copy_from_slice(&x.as_slice()[..r]);
        nu.push(x[r]);
    }
    Ok((a, nu))
}
