//! Input formats: binary PGM images and subspace-union text files.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::priors::{Subspace, SubspaceUnion};
use crate::transforms::UnitaryOperator;

/// Reads a binary 8-bit PGM (`P5`) with a square power-of-two side.
/// Returns row-major pixels scaled to `[0, 1]` and the side length.
pub fn load_image_pgm(path: &Path) -> Result<(Vec<f64>, usize)> {
    parse_pgm(&std::fs::read(path)?)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<(Vec<f64>, usize)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("expected binary PGM magic P5, found {:?}", fields[0])));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::Format(format!("bad PGM {what} {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1], "width")?, num(&fields[2], "height")?, num(&fields[3], "maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM depth (maxval {maxval}); only 8-bit images")));
    }
    if w != h {
        return Err(Error::Format(format!("image is {w}x{h}, expected square")));
    }
    if w < 2 || !w.is_power_of_two() {
        return Err(Error::Format(format!("image side {w} is not a power of two")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let data = bytes.get(pos..pos + w * h).ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    Ok((data.iter().map(|&b| b as f64 / maxval as f64).collect(), w))
}

/// Writes an 8-bit `P5` image from values in `[0, 1]` (clamped).
pub fn write_pgm<W: Write>(mut w: W, pixels: &[f64], side: usize) -> Result<()> {
    if pixels.len() != side * side {
        return Err(Error::Dimension(format!("{} pixels for side {side}", pixels.len())));
    }
    write!(w, "P5\n{side} {side}\n255\n")?;
    let raster: Vec<u8> = pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_all(&raster)?;
    Ok(())
}

/// Coefficients of a signal in a real basis with all but the `s`
/// largest-magnitude entries zeroed (ties keep the lower index).
#[derive(Clone, Debug, PartialEq)]
pub struct Sparsified {
    pub coefficients: Vec<f64>,
    /// The signal synthesized back from the kept coefficients.
    pub signal: Vec<f64>,
}

pub fn sparsify_in_basis(signal: &[f64], w: &UnitaryOperator, s: usize) -> Result<Sparsified> {
    if signal.len() != w.n() {
        return Err(Error::Dimension(format!("signal length {} vs basis size {}", signal.len(), w.n())));
    }
    if s == 0 || s > w.n() {
        return Err(Error::InvalidArgument(format!("sparsity {s} not in 1..={}", w.n())));
    }
    let coeffs: Vec<f64> = w.forward_real(signal).iter().map(|z| z.re).collect();
    let coefficients = crate::priors::SparsePrior::new(w.n(), s)?.project(&coeffs);
    let signal = w.adjoint(&crate::linalg::to_complex(&coefficients)).iter().map(|z| z.re).collect();
    Ok(Sparsified { coefficients, signal })
}

/// Reads a union of subspaces:
///
/// ```text
/// # comment
/// n 4
/// subspace
/// 1 0 0 0
/// 0 1 0 0
/// subspace
/// 0 0 1 1
/// ```
///
/// Each `subspace` block lists spanning vectors, one per line; they are
/// orthonormalized on load.
pub fn read_union<R: BufRead>(r: R) -> Result<SubspaceUnion> {
    let mut n: Option<usize> = None;
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |m: &str| Error::Format(format!("union file line {}: {m}", lineno + 1));
        if let Some(rest) = t.strip_prefix("n ") {
            if n.is_some() {
                return Err(err("duplicate n"));
            }
            n = Some(rest.trim().parse().map_err(|_| err("bad n"))?);
        } else if t == "subspace" {
            if n.is_none() {
                return Err(err("n must come first"));
            }
            blocks.push(Vec::new());
        } else {
            let dim = n.ok_or_else(|| err("n must come first"))?;
            let block = blocks.last_mut().ok_or_else(|| err("vector outside a subspace block"))?;
            let v: Vec<f64> = t
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| err("bad number")))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(err(&format!("expected {dim} entries, found {}", v.len())));
            }
            block.push(v);
        }
    }
    let n = n.ok_or_else(|| Error::Format("union file has no n".into()))?;
    let subspaces = blocks
        .into_iter()
        .map(|vs| {
            let m = DMatrix::from_fn(n, vs.len(), |r, c| vs[c][r]);
            Subspace::from_spanning(&m)
        })
        .collect::<Result<Vec<_>>>()?;
    SubspaceUnion::new(subspaces)
}

pub fn load_union(path: &Path) -> Result<SubspaceUnion> {
    read_union(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes a union with its orthonormal bases, 17 significant digits.
pub fn write_union<W: Write>(mut w: W, u: &SubspaceUnion) -> Result<()> {
    writeln!(w, "n {}", u.ambient_dim())?;
    for s in u.iter() {
        writeln!(w, "subspace")?;
        for c in 0..s.dim() {
            let row: Vec<String> = s.basis().column(c).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}
