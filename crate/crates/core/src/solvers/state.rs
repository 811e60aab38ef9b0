use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelDims;

/// Consensus residuals of the three splits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    /// `||A - S||_F`
    pub a_split: f64,
    /// `||B - S1||_F`
    pub b_split: f64,
    /// `||D B - S2||_F`
    pub db_split: f64,
}

/// Primal, split and dual variables of one cyclic-descent run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub a: Matrix,
    pub b: Matrix,
    pub s: Matrix,
    pub l: Matrix,
    pub s1: Matrix,
    pub s2: Matrix,
    pub l1: Matrix,
    pub l2: Matrix,
    /// Completed outer iterations.
    pub iter: usize,
    pub objective_history: Vec<f64>,
    pub residuals: Residuals,
}

impl SolverState {
    /// All-zero state for the given dimensions.
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims { p, n, m, r } = dims;
        Self {
            a: Matrix::zeros(r, n),
            b: Matrix::zeros(m, r),
            s: Matrix::zeros(r, n),
            l: Matrix::zeros(r, n),
            s1: Matrix::zeros(m, r),
            s2: Matrix::zeros(p, r),
            l1: Matrix::zeros(m, r),
            l2: Matrix::zeros(p, r),
            iter: 0,
            objective_history: Vec::new(),
            residuals: Residuals::default(),
        }
    }

    /// Infers `(p, n, m, r)` from the stored matrices.
    pub fn dims(&self, p: usize) -> ModelDims {
        ModelDims {
            p,
            n: self.a.cols(),
            m: self.b.rows(),
            r: self.a.rows(),
        }
    }

    /// Checks every matrix against `dims`.
    pub fn check(&self, dims: ModelDims) -> Result<()> {
        let ModelDims { p, n, m, r } = dims;
        let expect = [
            ("state A", &self.a, (r, n)),
            ("state S", &self.s, (r, n)),
            ("state L", &self.l, (r, n)),
            ("state B", &self.b, (m, r)),
            ("state S1", &self.s1, (m, r)),
            ("state L1", &self.l1, (m, r)),
            ("state S2", &self.s2, (p, r)),
            ("state L2", &self.l2, (p, r)),
        ];
        for (what, mat, shape) in expect {
            if mat.shape() != shape {
                return Err(Error::dims(what, shape, mat.shape()));
            }
        }
        Ok(())
    }

    pub(crate) fn ensure_finite(&self, iteration: usize) -> Result<()> {
        let named = [
            ("A", &self.a),
            ("B", &self.b),
            ("S", &self.s),
            ("L", &self.l),
            ("S1", &self.s1),
            ("S2", &self.s2),
            ("L1", &self.l1),
            ("L2", &self.l2),
        ];
        for (what, m) in named {
            if !m.is_finite() {
                return Err(Error::Diverged { what, iteration });
            }
        }
        Ok(())
    }
}

/// Run summary kept alongside the estimates.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub objective_history: Vec<f64>,
    pub residuals: Residuals,
    pub outer_iterations: usize,
    pub stopped_early: bool,
    /// Wall-clock seconds spent in the solver.
    pub elapsed_secs: f64,
}

/// Output of a solver run.
#[derive(Debug, Clone)]
pub struct UnmixResult {
    /// Last sum-to-one solve; columns sum to one, tiny negatives possible.
    pub a_raw: Matrix,
    /// `a_raw` with negatives clipped and columns renormalized.
    pub a_feasible: Matrix,
    /// Estimated mixing matrix. `None` for FCLSU.
    pub b_hat: Option<Matrix>,
    /// `D * b_hat`, or the given endmembers for FCLSU.
    pub e_hat: Matrix,
    pub diagnostics: Diagnostics,
}

/// Clips negatives to zero and rescales each column to sum to one. A column
/// with no positive mass becomes uniform.
pub fn project_feasible(a: &Matrix) -> Matrix {
    let r = a.rows();
    let mut out = a.map(|v| v.max(0.0));
    for j in 0..out.cols() {
        let col = out.col_mut(j);
        let sum: f64 = col.iter().sum();
        if sum > 0.0 {
            col.iter_mut().for_each(|v| *v /= sum);
        } else {
            col.iter_mut().for_each(|v| *v = 1.0 / r as f64);
        }
    }
    out
}
