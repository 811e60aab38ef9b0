//! Model dimensions, the data-fit objective `0.5 ||Y - DBA||_F^2`, and
//! abundance constraint diagnostics.

use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, LibraryMatrix, Matrix, MixingMatrix, ObservationMatrix};

/// Sizes of the `Y = DBA + N` model: `p` bands, `n` pixels, `m` library
/// atoms and `r` endmembers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub r: usize,
}

impl ModelDims {
    pub fn new(p: usize, n: usize, m: usize, r: usize) -> Result<Self> {
        for (name, v) in [("p", p), ("n", n), ("m", m), ("r", r)] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if r > m {
            return Err(Error::param("r", format!("r = {r} exceeds library size m = {m}")));
        }
        let dims = Self { p, n, m, r };
        if !dims.is_overcomplete() {
            log::debug!("library is not overcomplete (p = {p}, m = {m})");
        }
        Ok(dims)
    }

    /// Reads `(p, n, m)` from the scene and library and checks they agree.
    pub fn from_data(y: &ObservationMatrix, d: &LibraryMatrix, r: usize) -> Result<Self> {
        if d.rows() != y.rows() {
            return Err(Error::dims(
                "library rows vs observation bands",
                (y.rows(), d.cols()),
                d.shape(),
            ));
        }
        Self::new(y.rows(), y.cols(), d.cols(), r)
    }

    /// Typical sparse-unmixing setting where the library has many more atoms
    /// than bands.
    pub fn is_overcomplete(&self) -> bool {
        self.p < self.m
    }
}

/// Returns `0.5 * ||Y - D B A||_F^2`.
pub fn objective_value(y: &ObservationMatrix, d: &LibraryMatrix, b: &MixingMatrix, a: &AbundanceMatrix) -> Result<f64> {
    let (p, n) = y.shape();
    if d.rows() != p {
        return Err(Error::dims("objective: D rows vs Y rows", (p, d.cols()), d.shape()));
    }
    let m = d.cols();
    if b.rows() != m {
        return Err(Error::dims("objective: B vs D", (m, b.cols()), b.shape()));
    }
    let r = b.cols();
    a.expect_shape("objective: A vs (B, Y)", (r, n))?;
    let e = d.matmul(b);
    Ok(residual_objective(y, &e, a))
}

/// `0.5 ||Y - E A||_F^2` for already conforming inputs.
pub(crate) fn residual_objective(y: &Matrix, e: &Matrix, a: &Matrix) -> f64 {
    let fit = e.matmul(a);
    0.5 * y
        .as_slice()
        .iter()
        .zip(fit.as_slice())
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
}

/// How far an abundance matrix is from the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintViolations {
    /// Largest `|column sum - 1|`.
    pub asc_max: f64,
    /// Smallest entry; negative values measure the non-negativity violation.
    pub anc_min: f64,
}

pub fn constraint_violations(a: &AbundanceMatrix) -> Result<ConstraintViolations> {
    if a.is_empty() {
        return Err(Error::Empty("abundance matrix"));
    }
    let asc_max = a
        .columns()
        .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ConstraintViolations {
        asc_max,
        anc_min: a.min(),
    })
}
