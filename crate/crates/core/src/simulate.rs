//! Seeded synthetic scenes.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`, with a separate ChaCha stream per purpose so that
//! changing one part of a configuration does not shift the draws of another:
//!
//! | stream | use                                   |
//! |--------|---------------------------------------|
//! | 0      | abundance sampling                    |
//! | 1      | additive noise                        |
//! | 2      | random atom selection                 |
//! | 3      | synthetic library spectra             |
//! | 4      | per-endmember scale perturbation      |
//!
//! Gaussian variates use `rand_distr::StandardNormal` (ziggurat method).
//! Dirichlet draws are built from `Gamma(alpha + 1)` variates and uniform
//! powers in log space, `log g_i = log G_i + log(U_i) / alpha`, followed by
//! a log-sum-exp normalization. This stays accurate for the small
//! concentrations (`alpha = 1 / r`) used by the purity generator, where naive
//! gamma draws underflow to zero.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, EndmemberMatrix, LibraryMatrix, Matrix, ObservationMatrix};

/// Candidate draws allowed before purity sampling gives up.
pub const MAX_PURITY_DRAWS: u64 = 10_000_000;

/// Width of the purity window below `rho`.
pub const PURITY_WINDOW: f64 = 0.1;

const STREAM_ABUNDANCE: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_ATOMS: u64 = 2;
const STREAM_LIBRARY: u64 = 3;
const STREAM_SCALE: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// No spatial structure; pixel purity controlled by `rho`.
    Purity,
    /// Rows of pure square patches over a uniformly mixed background.
    Dc1,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "purity" => Ok(SceneKind::Purity),
            "dc1" => Ok(SceneKind::Dc1),
            other => Err(Error::param("kind", format!("unknown scene kind `{other}`"))),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Purity => "purity",
            SceneKind::Dc1 => "dc1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub kind: SceneKind,
    /// Pixel count for [`SceneKind::Purity`].
    pub pixels: usize,
    /// Image side for [`SceneKind::Dc1`]; the scene has `side * side` pixels.
    pub side: usize,
    pub r: usize,
    /// Upper bound on the l2 norm of each abundance column (purity only).
    pub rho: f64,
    /// Dirichlet concentration; `None` means `1 / r`.
    pub alpha: Option<f64>,
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Library atoms to mix; drawn at random when `None`.
    pub library_indices: Option<Vec<usize>>,
}

impl SimulationConfig {
    pub fn purity(pixels: usize, r: usize, rho: f64, seed: u64) -> Self {
        Self {
            kind: SceneKind::Purity,
            pixels,
            side: 0,
            r,
            rho,
            alpha: None,
            snr_db: None,
            seed,
            library_indices: None,
        }
    }

    pub fn dc1(side: usize, r: usize, seed: u64) -> Self {
        Self {
            kind: SceneKind::Dc1,
            pixels: side * side,
            side,
            r,
            rho: 1.0,
            alpha: None,
            snr_db: None,
            seed,
            library_indices: None,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    pub fn with_atoms(mut self, atoms: Vec<usize>) -> Self {
        self.library_indices = Some(atoms);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.r as f64)
    }
}

/// Generation metadata stored with a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMeta {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub snr_db: Option<f64>,
    pub rho: Option<f64>,
    pub seed: u64,
    pub kind: SceneKind,
    /// Side length for DC1 scenes.
    pub side: Option<usize>,
    pub atoms: Vec<usize>,
}

/// A scene with its library and, for synthetic data, the ground truth.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub y: ObservationMatrix,
    pub d: LibraryMatrix,
    pub a_true: Option<AbundanceMatrix>,
    pub e_true: Option<EndmemberMatrix>,
    pub meta: BundleMeta,
}

/// One symmetric Dirichlet draw, see the module docs for the construction.
fn dirichlet(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, alpha: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        let g: f64 = gamma.sample(rng);
        // (0, 1] avoids log(0)
        let u: f64 = 1.0 - rng.random::<f64>();
        *v = g.ln() + u.ln() / alpha;
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
}

/// Lower edge of the purity window, clipped to the smallest l2 norm a point
/// of the `r`-simplex can have.
pub fn purity_window(rho: f64, r: usize) -> (f64, f64) {
    ((rho - PURITY_WINDOW).max(1.0 / (r as f64).sqrt()), rho)
}

/// Draws `n` abundance columns from `Dirichlet(alpha, ..., alpha)`, keeping
/// only draws whose l2 norm lies in `(max(rho - 0.1, 1/sqrt(r)), rho]`.
pub fn sample_purity_abundances(r: usize, n: usize, rho: f64, alpha: f64, seed: u64) -> Result<AbundanceMatrix> {
    if r == 0 || n == 0 {
        return Err(Error::param("r/n", "endmember and pixel counts must be at least 1"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let floor = 1.0 / (r as f64).sqrt();
    if !(rho > floor) || !(rho <= 1.0) {
        return Err(Error::InfeasiblePurity { rho, r, lower: floor });
    }
    let (lower, upper) = purity_window(rho, r);
    let gamma = Gamma::new(alpha + 1.0, 1.0).map_err(|e| Error::param("alpha", e.to_string()))?;
    let mut rng = rng(seed, STREAM_ABUNDANCE);
    let mut out = Matrix::zeros(r, n);
    let mut draw = vec![0.0; r];
    let mut accepted = 0;
    let mut drawn = 0u64;
    while accepted < n {
        if drawn >= MAX_PURITY_DRAWS {
            return Err(Error::SamplingStall {
                accepted,
                drawn,
                rate: accepted as f64 / drawn as f64,
            });
        }
        drawn += 1;
        dirichlet(&mut rng, &gamma, alpha, &mut draw);
        let norm = draw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > lower && norm <= upper {
            out.col_mut(accepted).copy_from_slice(&draw);
            accepted += 1;
        }
    }
    log::debug!("purity sampling: {n} accepted out of {drawn} draws");
    Ok(out)
}

/// Square patch layout of a DC1 scene: for each endmember `k`, the pixel
/// indices (row-major, `row * side + col`) of its pure patches.
pub fn dc1_patches(side: usize, r: usize) -> Result<Vec<Vec<usize>>> {
    if r == 0 {
        return Err(Error::param("r", "must be at least 1"));
    }
    let band = side / r;
    if band < 2 {
        return Err(Error::param(
            "side",
            format!(
                "side {side} is too small for {r} rows of patches (need at least {})",
                2 * r
            ),
        ));
    }
    let patch = band / 2;
    let y_off = (band - patch) / 2;
    let step = 2 * patch;
    let mut layout = Vec::with_capacity(r);
    for k in 0..r {
        let top = k * band + y_off;
        let mut pixels = Vec::new();
        let mut left = patch / 2;
        while left + patch <= side {
            for row in top..top + patch {
                for col in left..left + patch {
                    pixels.push(row * side + col);
                }
            }
            left += step;
        }
        layout.push(pixels);
    }
    Ok(layout)
}

fn resolve_atoms(d: &LibraryMatrix, r: usize, atoms: Option<&[usize]>, seed: u64) -> Result<Vec<usize>> {
    let m = d.cols();
    if r > m {
        return Err(Error::param("r", format!("r = {r} exceeds library size m = {m}")));
    }
    match atoms {
        Some(list) => {
            if list.len() != r {
                return Err(Error::param(
                    "library_indices",
                    format!("expected {r} atoms, got {}", list.len()),
                ));
            }
            if let Some(&bad) = list.iter().find(|&&j| j >= m) {
                return Err(Error::param(
                    "library_indices",
                    format!("atom {bad} out of range (m = {m})"),
                ));
            }
            Ok(list.to_vec())
        }
        None => Ok(sample(&mut rng(seed, STREAM_ATOMS), m, r).into_vec()),
    }
}

/// DC1-style scene on a `side x side` grid. Endmember `k` owns a row of
/// pure square patches; all other pixels are uniform mixtures. The returned
/// `y` is noise free.
pub fn generate_dc1(
    side: usize,
    r: usize,
    d: &LibraryMatrix,
    atom_indices: Option<&[usize]>,
    seed: u64,
) -> Result<DatasetBundle> {
    let layout = dc1_patches(side, r)?;
    let atoms = resolve_atoms(d, r, atom_indices, seed)?;
    let n = side * side;
    let mut a = Matrix::filled(r, n, 1.0 / r as f64);
    for (k, pixels) in layout.iter().enumerate() {
        for &j in pixels {
            let col = a.col_mut(j);
            col.fill(0.0);
            col[k] = 1.0;
        }
    }
    let e = d.select_columns(&atoms);
    let y = e.matmul(&a);
    Ok(DatasetBundle {
        meta: BundleMeta {
            p: d.rows(),
            n,
            m: d.cols(),
            r,
            snr_db: None,
            rho: None,
            seed,
            kind: SceneKind::Dc1,
            side: Some(side),
            atoms,
        },
        y,
        d: d.clone(),
        a_true: Some(a),
        e_true: Some(e),
    })
}

/// Purity-controlled scene without spatial structure; `y` is noise free.
pub fn generate_purity(config: &SimulationConfig, d: &LibraryMatrix) -> Result<DatasetBundle> {
    let a = sample_purity_abundances(config.r, config.pixels, config.rho, config.alpha(), config.seed)?;
    let atoms = resolve_atoms(d, config.r, config.library_indices.as_deref(), config.seed)?;
    let e = d.select_columns(&atoms);
    let y = e.matmul(&a);
    Ok(DatasetBundle {
        meta: BundleMeta {
            p: d.rows(),
            n: config.pixels,
            m: d.cols(),
            r: config.r,
            snr_db: None,
            rho: Some(config.rho),
            seed: config.seed,
            kind: SceneKind::Purity,
            side: None,
            atoms,
        },
        y,
        d: d.clone(),
        a_true: Some(a),
        e_true: Some(e),
    })
}

/// Adds i.i.d. Gaussian noise scaled so that
/// `10 log10(||y||_F^2 / ||noise||_F^2) = snr_db` for the realized draw.
pub fn add_noise_snr(y_clean: &ObservationMatrix, snr_db: f64, seed: u64) -> Result<ObservationMatrix> {
    if !snr_db.is_finite() {
        return Err(Error::param("snr_db", format!("must be finite, got {snr_db}")));
    }
    let signal = y_clean.frobenius_norm_sq();
    if signal == 0.0 {
        return Err(Error::param("y_clean", "zero signal, SNR is undefined"));
    }
    let mut rng = rng(seed, STREAM_NOISE);
    let noise: Vec<f64> = (0..y_clean.as_slice().len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let energy: f64 = noise.iter().map(|v| v * v).sum();
    let sigma = (signal / (energy * 10f64.powf(snr_db / 10.0))).sqrt();
    let data = y_clean
        .as_slice()
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + sigma * n)
        .collect();
    Matrix::new(y_clean.rows(), y_clean.cols(), data)
}

/// Realized SNR in dB of `noisy` relative to `clean`.
pub fn realized_snr_db(clean: &Matrix, noisy: &Matrix) -> f64 {
    let noise = noisy.sub(clean).frobenius_norm_sq();
    10.0 * (clean.frobenius_norm_sq() / noise).log10()
}

/// Builds a scene from a configuration, adding noise when `snr_db` is set.
pub fn simulate(config: &SimulationConfig, d: &LibraryMatrix) -> Result<DatasetBundle> {
    let mut bundle = match config.kind {
        SceneKind::Purity => generate_purity(config, d)?,
        SceneKind::Dc1 => generate_dc1(config.side, config.r, d, config.library_indices.as_deref(), config.seed)?,
    };
    if let Some(snr) = config.snr_db {
        bundle.y = add_noise_snr(&bundle.y, snr, config.seed)?;
        bundle.meta.snr_db = Some(snr);
    }
    Ok(bundle)
}

/// Smooth, positive reflectance-like spectra: a sloped baseline plus a few
/// Gaussian absorption and emission features, scaled into `(0, 1]`.
pub fn synthetic_library(p: usize, m: usize, seed: u64) -> Result<LibraryMatrix> {
    if p < 2 || m == 0 {
        return Err(Error::param("p/m", "need at least 2 bands and 1 atom"));
    }
    let mut rng = rng(seed, STREAM_LIBRARY);
    let mut d = Matrix::zeros(p, m);
    for j in 0..m {
        let base = rng.random_range(0.2..0.6);
        let slope = rng.random_range(-0.3..0.3);
        let features = rng.random_range(2..6);
        let bumps: Vec<(f64, f64, f64)> = (0..features)
            .map(|_| {
                (
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.03..0.2),
                    rng.random_range(-0.35..0.45),
                )
            })
            .collect();
        let col = d.col_mut(j);
        for (i, v) in col.iter_mut().enumerate() {
            let x = i as f64 / (p - 1) as f64;
            let mut s = base + slope * (x - 0.5);
            for &(c, w, h) in &bumps {
                s += h * (-0.5 * ((x - c) / w).powi(2)).exp();
            }
            *v = s.max(0.01);
        }
        let max = col.iter().copied().fold(0.0, f64::max);
        if max > 1.0 {
            col.iter_mut().for_each(|v| *v /= max);
        }
    }
    Ok(d)
}

/// Multiplies each column by an independent factor drawn uniformly from
/// `[1 - spread, 1 + spread]`.
pub fn scale_columns(e: &Matrix, spread: f64, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&spread) {
        return Err(Error::param("spread", format!("must lie in [0, 1), got {spread}")));
    }
    let mut rng = rng(seed, STREAM_SCALE);
    let mut out = e.clone();
    for j in 0..out.cols() {
        let f = 1.0 + rng.random_range(-spread..=spread);
        out.col_mut(j).iter_mut().for_each(|v| *v *= f);
    }
    Ok(out)
}
