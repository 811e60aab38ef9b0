use crate::matrix::{dot, Matrix};

/// Successive projection over the pixels of `y`: returns `r` column indices
/// whose spectra span the data best, greedily.
pub fn successive_projection(y: &Matrix, r: usize) -> Vec<usize> {
    let mut residual = y.clone();
    let mut picked = Vec::with_capacity(r);
    for _ in 0..r.min(y.cols()) {
        let (best, norm_sq) = residual
            .columns()
            .map(|c| dot(c, c))
            .enumerate()
            .fold((0, -1.0), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        picked.push(best);
        if norm_sq <= 0.0 {
            continue;
        }
        let u: Vec<f64> = residual.col(best).iter().map(|v| v / norm_sq.sqrt()).collect();
        for j in 0..residual.cols() {
            let col = residual.col_mut(j);
            let proj = dot(&u, col);
            for (c, &ui) in col.iter_mut().zip(&u) {
                *c -= proj * ui;
            }
        }
    }
    picked
}

/// For each endmember, the unused library atom with the largest cosine
/// similarity to a successive-projection pixel. Ties and zero spectra fall
/// back to the lowest unused index.
pub fn select_atoms(y: &Matrix, d: &Matrix, r: usize) -> Vec<usize> {
    let pixels = successive_projection(y, r);
    let atom_norms: Vec<f64> = d.columns().map(|c| dot(c, c).sqrt()).collect();
    let mut used = vec![false; d.cols()];
    let mut atoms = Vec::with_capacity(r);
    for k in 0..r {
        let pixel = pixels.get(k).map(|&j| y.col(j));
        let pixel_norm = pixel.map_or(0.0, |p| dot(p, p).sqrt());
        let mut best: Option<(usize, f64)> = None;
        for (j, col) in d.columns().enumerate() {
            if used[j] {
                continue;
            }
            let score = match pixel {
                Some(p) if pixel_norm > 0.0 && atom_norms[j] > 0.0 => dot(p, col) / (pixel_norm * atom_norms[j]),
                _ => f64::NEG_INFINITY,
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (j, _) = best.expect("r <= m guarantees an unused atom");
        used[j] = true;
        atoms.push(j);
    }
    atoms
}

/// One-hot mixing matrix selecting `atoms`.
pub fn one_hot_mixing(m: usize, atoms: &[usize]) -> Matrix {
    let mut b = Matrix::zeros(m, atoms.len());
    for (k, &j) in atoms.iter().enumerate() {
        b[(j, k)] = 1.0;
    }
    b
}
