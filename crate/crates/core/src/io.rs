//! File formats: the binary FUMX matrix format, a CSV import path for
//! hand-made fixtures, dataset bundle directories and the diagnostics
//! manifest written by `unmix`.
//!
//! # FUMX layout
//!
//! ```text
//! offset  size  field
//! 0       4     magic, ASCII "FUMX"
//! 4       4     version, u32 little-endian, currently 1
//! 8       8     rows, u64 little-endian
//! 16      8     cols, u64 little-endian
//! 24      8*rows*cols  entries, f64 little-endian, column-major
//! ```
//!
//! The file is exactly `24 + 8 * rows * cols` bytes. Matrices with a zero
//! dimension are rejected in both directions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::simulate::{BundleMeta, DatasetBundle, SceneKind};
use crate::solvers::{AdmmParams, Diagnostics, Method};

pub const MAGIC: [u8; 4] = *b"FUMX";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Serializes a matrix to FUMX bytes.
pub fn matrix_to_bytes(m: &Matrix) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Empty("matrix with a zero dimension"));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses FUMX bytes. `path` is only used in error messages.
pub fn matrix_from_bytes(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let found = bytes.len() as u64;
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN as u64,
            found,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: magic,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::BadVersion {
            path: path.into(),
            found: version,
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let overflow = || Error::DimOverflow {
        path: path.into(),
        rows,
        cols,
    };
    let count = rows.checked_mul(cols).ok_or_else(overflow)?;
    let expected = count
        .checked_mul(8)
        .and_then(|b| b.checked_add(HEADER_LEN as u64))
        .ok_or_else(overflow)?;
    let (rows_us, cols_us) = (
        usize::try_from(rows).map_err(|_| overflow())?,
        usize::try_from(cols).map_err(|_| overflow())?,
    );
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("matrix with a zero dimension"));
    }
    if found < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingData {
            path: path.into(),
            expected,
            found,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::new(rows_us, cols_us, data).map_err(|e| Error::Parse {
        path: path.into(),
        reason: e.to_string(),
    })
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = matrix_to_bytes(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    matrix_from_bytes(&bytes, path)
}

/// Parses the CSV fixture format: a header line `rows,cols` followed by the
/// entries in row-major order, comma or whitespace separated.
pub fn matrix_from_csv(text: &str, path: &Path) -> Result<Matrix> {
    let parse_err = |reason: String| Error::Parse {
        path: path.into(),
        reason,
    };
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| parse_err("missing header".into()))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(format!("bad header `{header}`: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(format!("header must be `rows,cols`, got `{header}`")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| parse_err(format!("bad value `{tok}`: {e}")))?,
            );
        }
    }
    if values.len() != rows * cols {
        return Err(parse_err(format!(
            "expected {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("matrix with a zero dimension"));
    }
    Matrix::new(
        rows,
        cols,
        (0..rows * cols).map(|k| values[(k % rows) * cols + k / rows]).collect(),
    )
    .map_err(|e| parse_err(e.to_string()))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_csv(&text, path)
}

/// Reads FUMX, or CSV when the extension is `.csv`.
pub fn read_any(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path),
        _ => read_matrix(path),
    }
}

pub const MANIFEST_NAME: &str = "manifest.txt";

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Writes a bundle into `dir` (created if needed): `Y.fumx`, `D.fumx`,
/// optional `A_true.fumx` and `E_true.fumx`, and `manifest.txt`.
pub fn write_bundle(dir: impl AsRef<Path>, bundle: &DatasetBundle) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(dir.join("Y.fumx"), &bundle.y)?;
    write_matrix(dir.join("D.fumx"), &bundle.d)?;
    let meta = &bundle.meta;
    let mut text = String::new();
    let _ = writeln!(text, "format = funmix-bundle");
    let _ = writeln!(text, "version = 1");
    let _ = writeln!(text, "kind = {}", meta.kind);
    let _ = writeln!(text, "p = {}", meta.p);
    let _ = writeln!(text, "n = {}", meta.n);
    let _ = writeln!(text, "m = {}", meta.m);
    let _ = writeln!(text, "r = {}", meta.r);
    let _ = writeln!(text, "snr_db = {}", fmt_opt(meta.snr_db));
    let _ = writeln!(text, "rho = {}", fmt_opt(meta.rho));
    let _ = writeln!(text, "seed = {}", meta.seed);
    let _ = writeln!(text, "side = {}", fmt_opt(meta.side));
    let atoms: Vec<String> = meta.atoms.iter().map(usize::to_string).collect();
    let _ = writeln!(text, "atoms = {}", atoms.join(","));
    let _ = writeln!(text, "y = Y.fumx");
    let _ = writeln!(text, "d = D.fumx");
    if let Some(a) = &bundle.a_true {
        write_matrix(dir.join("A_true.fumx"), a)?;
        let _ = writeln!(text, "a_true = A_true.fumx");
    }
    if let Some(e) = &bundle.e_true {
        write_matrix(dir.join("E_true.fumx"), e)?;
        let _ = writeln!(text, "e_true = E_true.fumx");
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Parses `key = value` lines, ignoring blanks and `#` comments.
pub fn parse_manifest(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            reason: format!("line {}: expected `key = value`", no + 1),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Reads a bundle written by [`write_bundle`] and checks that every
/// recorded dimension matches the matrix files.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let map = parse_manifest(&text, &path)?;
    let bad = |reason: String| Error::Parse {
        path: path.clone(),
        reason,
    };
    let get = |k: &str| {
        map.get(k)
            .map(String::as_str)
            .ok_or_else(|| bad(format!("missing key `{k}`")))
    };
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|e| bad(format!("`{k}`: {e}"))) };
    let opt_f64 = |k: &str| -> Result<Option<f64>> {
        match map.get(k).map(String::as_str) {
            None | Some("none") => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| bad(format!("`{k}`: {e}"))),
        }
    };
    let meta = BundleMeta {
        p: num("p")?,
        n: num("n")?,
        m: num("m")?,
        r: num("r")?,
        snr_db: opt_f64("snr_db")?,
        rho: opt_f64("rho")?,
        seed: get("seed")?.parse().map_err(|e| bad(format!("`seed`: {e}")))?,
        kind: get("kind")?.parse::<SceneKind>().map_err(|e| bad(e.to_string()))?,
        side: match map.get("side").map(String::as_str) {
            None | Some("none") => None,
            Some(v) => Some(v.parse().map_err(|e| bad(format!("`side`: {e}")))?),
        },
        atoms: match map.get("atoms").map(String::as_str) {
            None | Some("") => Vec::new(),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("`atoms`: {e}")))?,
        },
    };
    let load = |key: &str, shape: (usize, usize)| -> Result<Matrix> {
        let file: PathBuf = dir.join(get(key)?);
        let m = read_matrix(&file)?;
        m.expect_shape(&format!("bundle {key} ({})", file.display()), shape)?;
        Ok(m)
    };
    let y = load("y", (meta.p, meta.n))?;
    let d = load("d", (meta.p, meta.m))?;
    let a_true = map
        .contains_key("a_true")
        .then(|| load("a_true", (meta.r, meta.n)))
        .transpose()?;
    let e_true = map
        .contains_key("e_true")
        .then(|| load("e_true", (meta.p, meta.r)))
        .transpose()?;
    Ok(DatasetBundle {
        y,
        d,
        a_true,
        e_true,
        meta,
    })
}

/// Human-readable run summary. One `objective[t] = value` line per outer
/// iteration so trajectories can be grepped.
pub fn diagnostics_text(method: Method, params: &AdmmParams, r: usize, diag: &Diagnostics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method = {method}");
    let _ = writeln!(s, "r = {r}");
    let _ = writeln!(s, "mu_a = {}", params.mu_a);
    let _ = writeln!(s, "mu_b1 = {}", params.mu_b1);
    let _ = writeln!(s, "mu_b2 = {}", params.mu_b2);
    let _ = writeln!(s, "lambda = {}", params.lambda);
    let _ = writeln!(s, "outer = {}", params.outer);
    let _ = writeln!(s, "inner_a = {}", params.inner_a);
    let _ = writeln!(s, "inner_b = {}", params.inner_b);
    let _ = writeln!(s, "tol = {}", params.tol);
    let _ = writeln!(s, "outer_iterations = {}", diag.outer_iterations);
    let _ = writeln!(s, "stopped_early = {}", diag.stopped_early);
    let _ = writeln!(s, "residual_a_split = {:e}", diag.residuals.a_split);
    let _ = writeln!(s, "residual_b_split = {:e}", diag.residuals.b_split);
    let _ = writeln!(s, "residual_db_split = {:e}", diag.residuals.db_split);
    let _ = writeln!(s, "wall_time_secs = {:.6}", diag.elapsed_secs);
    for (t, f) in diag.objective_history.iter().enumerate() {
        let _ = writeln!(s, "objective[{}] = {:e}", t + 1, f);
    }
    s
}
