//! Fixtures for the solver benchmarks.

use funmix::simulate::{simulate, synthetic_library, SimulationConfig};
use funmix::Matrix;

/// A noisy purity scene over a synthetic library: `(Y, D)` with `p` bands,
/// `m` atoms, `r` endmembers and `n` pixels.
pub fn scene(p: usize, m: usize, r: usize, n: usize) -> (Matrix, Matrix) {
    let d = synthetic_library(p, m, 1).expect("valid library size");
    let cfg = SimulationConfig::purity(n, r, 0.8, 2).with_snr(30.0);
    let bundle = simulate(&cfg, &d).expect("valid scene");
    (bundle.y, d)
}
