//! Oracles and instance builders shared by the integration and acceptance
//! tests. Everything here is independent of the solver code paths.
#![allow(dead_code)]

use funmix::metrics::prune_library;
use funmix::simulate::{add_noise_snr, generate_dc1, scale_columns, synthetic_library};
use funmix::Matrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Columns uniform on the simplex (normalized exponentials).
pub fn simplex_columns(rng: &mut ChaCha8Rng, r: usize, n: usize) -> Matrix {
    let mut a = Matrix::from_fn(r, n, |_, _| -(1.0 - rng.random::<f64>()).ln());
    for j in 0..n {
        let s: f64 = a.col(j).iter().sum();
        a.col_mut(j).iter_mut().for_each(|v| *v /= s);
    }
    a
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::new(m.nrows(), m.ncols(), m.as_slice().to_vec()).unwrap()
}

/// `min ||y - E a||^2  s.t.  a >= 0, sum(a) = 1` by enumerating supports:
/// for every support the equality-constrained KKT system is solved with a
/// full-pivot LU, infeasible candidates are dropped, and the best objective
/// wins. Exact for full-column-rank `E`, exponential in `r`.
pub fn simplex_qp(y: &[f64], e: &Matrix) -> Vec<f64> {
    let r = e.cols();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << r) {
        let support: Vec<usize> = (0..r).filter(|k| mask & (1 << k) != 0).collect();
        let k = support.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                kkt[(a, b)] = dot(e.col(i), e.col(j));
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
            rhs[a] = dot(e.col(i), y);
        }
        rhs[k] = 1.0;
        let Some(sol) = kkt.full_piv_lu().solve(&rhs) else {
            continue;
        };
        if (0..k).any(|a| sol[a] < -1e-13) {
            continue;
        }
        let mut x = vec![0.0; r];
        for (a, &i) in support.iter().enumerate() {
            x[i] = sol[a].max(0.0);
        }
        let f = residual_sq(y, e, &x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    best.expect("the vertices of the simplex are always candidates").1
}

pub fn simplex_qp_matrix(y: &Matrix, e: &Matrix) -> Matrix {
    let cols: Vec<Vec<f64>> = y.columns().map(|c| simplex_qp(c, e)).collect();
    Matrix::from_columns(&cols).unwrap()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn residual_sq(y: &[f64], e: &Matrix, x: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| {
            let fit: f64 = (0..e.cols()).map(|k| e[(i, k)] * x[k]).sum();
            (y[i] - fit).powi(2)
        })
        .sum()
}

/// 60-band synthetic library pruned at 4.44 degrees.
pub fn pruned_library() -> Matrix {
    let lib = synthetic_library(60, 60, 11).unwrap();
    prune_library(&lib, 4.44).unwrap().library
}

/// Desk-scale scene: first 20 pruned atoms, DC1 20x20, 3 endmembers.
pub struct Desk {
    pub d: Matrix,
    pub y_clean: Matrix,
    pub a_true: Matrix,
    pub e_true: Matrix,
}

pub const DESK_ATOMS: [usize; 3] = [2, 9, 15];

pub fn desk(seed: u64) -> Desk {
    let d = pruned_library().select_columns(&(0..20).collect::<Vec<_>>());
    let bundle = generate_dc1(20, 3, &d, Some(&DESK_ATOMS), seed).unwrap();
    Desk {
        y_clean: bundle.y,
        a_true: bundle.a_true.unwrap(),
        e_true: bundle.e_true.unwrap(),
        d,
    }
}

/// Variability scene over the full pruned library: true endmembers scaled by
/// independent factors in `[0.9, 1.1]` before mixing, then noise at 20 dB.
pub fn variability(seed: u64) -> (Matrix, Matrix, Matrix) {
    let d = pruned_library();
    let bundle = generate_dc1(20, 3, &d, Some(&DESK_ATOMS), seed).unwrap();
    let a = bundle.a_true.unwrap();
    let e = scale_columns(bundle.e_true.as_ref().unwrap(), 0.1, seed).unwrap();
    let y = add_noise_snr(&e.matmul(&a), 20.0, seed).unwrap();
    (y, d, a)
}
