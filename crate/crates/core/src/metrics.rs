//! Abundance SRE, spectral angles, and angle-based library pruning.

use crate::error::{Error, Result};
use crate::matrix::{dot, AbundanceMatrix, LibraryMatrix, Matrix};

/// Signal-to-reconstruction error of an abundance estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SreReport {
    /// `20 log10(frob_true / frob_err)`; `+inf` for a perfect estimate.
    pub sre_db: f64,
    pub frob_true: f64,
    pub frob_err: f64,
}

pub fn sre(a_true: &AbundanceMatrix, a_hat: &AbundanceMatrix) -> Result<SreReport> {
    a_hat.expect_shape("sre: estimate vs reference", a_true.shape())?;
    let frob_true = a_true.frobenius_norm();
    if frob_true == 0.0 {
        return Err(Error::param("a_true", "reference abundances have zero norm"));
    }
    let frob_err = a_true.sub(a_hat).frobenius_norm();
    let sre_db = if frob_err == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (frob_true / frob_err).log10()
    };
    Ok(SreReport {
        sre_db,
        frob_true,
        frob_err,
    })
}

/// Angle between two spectra in degrees, in `[0, 180]`.
pub fn spectral_angle(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims("spectral_angle", (x.len(), 1), (y.len(), 1)));
    }
    let nx = dot(x, x).sqrt();
    let ny = dot(y, y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::param("spectrum", "zero vector has no spectral angle"));
    }
    // 2 atan2(|u - v|, |u + v|) for unit u, v; unlike acos of the cosine it
    // stays accurate for nearly parallel spectra.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// Result of [`prune_library`].
#[derive(Debug, Clone)]
pub struct PrunedLibrary {
    pub library: LibraryMatrix,
    /// Indices of the kept atoms in the input library, ascending.
    pub kept_indices: Vec<usize>,
    /// Removed atoms that were nearly collinear with a kept atom but differ
    /// in norm by at least 1%, as `(removed, kept)` pairs. Such atoms may be
    /// distinct materials that only differ by scale.
    pub scaled_duplicates: Vec<(usize, usize)>,
}

/// Collinearity threshold, in degrees, for the scaled-duplicate warning.
const COLLINEAR_DEG: f64 = 0.5;

/// Greedy pass in index order: atom `j` is kept iff its angle to every atom
/// kept so far is at least `min_angle_deg`.
pub fn prune_library(d: &LibraryMatrix, min_angle_deg: f64) -> Result<PrunedLibrary> {
    if d.cols() == 0 || d.rows() == 0 {
        return Err(Error::Empty("library"));
    }
    if !(min_angle_deg >= 0.0) {
        return Err(Error::param(
            "min_angle_deg",
            format!("must be non-negative, got {min_angle_deg}"),
        ));
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut scaled_duplicates = Vec::new();
    for j in 0..d.cols() {
        let candidate = d.col(j);
        let mut keep = true;
        for &k in &kept {
            let angle = spectral_angle(candidate, d.col(k))?;
            if angle < min_angle_deg {
                keep = false;
                let (nj, nk) = (dot(candidate, candidate).sqrt(), dot(d.col(k), d.col(k)).sqrt());
                if angle < COLLINEAR_DEG && (nj - nk).abs() >= 0.01 * nk {
                    log::warn!(
                        "atom {j} removed as a near-duplicate of atom {k} but differs in norm by {:.1}%",
                        100.0 * (nj - nk).abs() / nk
                    );
                    scaled_duplicates.push((j, k));
                }
                break;
            }
        }
        if keep {
            kept.push(j);
        }
    }
    Ok(PrunedLibrary {
        library: d.select_columns(&kept),
        kept_indices: kept,
        scaled_duplicates,
    })
}

/// Smallest pairwise spectral angle among the columns of `d`.
pub fn min_pairwise_angle(d: &LibraryMatrix) -> Result<f64> {
    let mut min = f64::INFINITY;
    for i in 0..d.cols() {
        for j in i + 1..d.cols() {
            min = min.min(spectral_angle(d.col(i), d.col(j))?);
        }
    }
    Ok(min)
}

/// Assigns each reference endmember (row of `a_true`) to a distinct row of
/// `a_hat` minimizing total squared abundance difference. Returns `perm`
/// with `perm[i]` the row of `a_hat` matched to reference row `i`.
///
/// Solvers return endmembers in arbitrary order, so estimates are reordered
/// with this before computing [`sre`].
pub fn match_endmembers(a_true: &AbundanceMatrix, a_hat: &AbundanceMatrix) -> Result<Vec<usize>> {
    if a_true.cols() != a_hat.cols() {
        return Err(Error::dims(
            "match_endmembers: pixel count",
            a_true.shape(),
            a_hat.shape(),
        ));
    }
    if a_true.rows() > a_hat.rows() {
        return Err(Error::dims(
            "match_endmembers: endmember count",
            a_true.shape(),
            a_hat.shape(),
        ));
    }
    let cost = Matrix::from_fn(a_true.rows(), a_hat.rows(), |i, j| {
        (0..a_true.cols())
            .map(|k| (a_true[(i, k)] - a_hat[(j, k)]).powi(2))
            .sum()
    });
    Ok(hungarian(&cost))
}

/// Reorders the rows of `a_hat` to best match `a_true`.
pub fn align_abundances(a_true: &AbundanceMatrix, a_hat: &AbundanceMatrix) -> Result<AbundanceMatrix> {
    let perm = match_endmembers(a_true, a_hat)?;
    Ok(a_hat.select_rows(&perm))
}

/// Minimum-cost assignment of rows to columns (rows <= cols), by the
/// shortest augmenting path form of the Hungarian method.
fn hungarian(cost: &Matrix) -> Vec<usize> {
    let (n, m) = cost.shape();
    // 1-based potentials, column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}
