//! Local coherences of measurement rows with respect to a prior.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priors::{Combinations, GenerativeNetwork, Subspace, SubspaceUnion};
use crate::rng;
use crate::transforms::UnitaryOperator;

/// Largest `n` for which exhaustive sparse enumeration is allowed.
pub const EXACT_SPARSE_MAX_N: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoherenceMethod {
    Exact,
    UpperBound,
    Empirical,
}

impl CoherenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            CoherenceMethod::Exact => "exact",
            CoherenceMethod::UpperBound => "upper_bound",
            CoherenceMethod::Empirical => "empirical",
        }
    }
}

impl fmt::Display for CoherenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoherenceMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CoherenceMethod::Exact),
            "upper_bound" => Ok(CoherenceMethod::UpperBound),
            "empirical" => Ok(CoherenceMethod::Empirical),
            _ => Err(Error::Format(format!("unknown coherence method {s:?}"))),
        }
    }
}

/// Local coherence vector `alpha` of the rows of a unitary operator.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceVector {
    pub alpha: Vec<f64>,
    pub method: CoherenceMethod,
    /// Free-form note on what the vector was computed from.
    pub prior_descriptor: String,
}

impl CoherenceVector {
    pub fn new(alpha: Vec<f64>, method: CoherenceMethod, prior_descriptor: impl Into<String>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Dimension("empty coherence vector".into()));
        }
        if let Some(i) = alpha.iter().position(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidArgument(format!("alpha[{i}] = {} is not a finite nonnegative value", alpha[i])));
        }
        Ok(CoherenceVector { alpha, method, prior_descriptor: prior_descriptor.into() })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.alpha)
    }

    /// Smallest strictly positive entry.
    pub fn min_positive(&self) -> Option<f64> {
        self.alpha.iter().cloned().filter(|a| *a > 0.0).reduce(f64::min)
    }

    /// Rows orthogonal to the prior (`alpha_j = 0`); they are never sampled.
    pub fn excluded(&self) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&j| self.alpha[j] == 0.0).collect()
    }

    /// CSV with header `index,alpha,method`, 0-based indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,alpha,method")?;
        for (j, a) in self.alpha.iter().enumerate() {
            writeln!(w, "{j},{a:.16e},{}", self.method)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "index,alpha,method" {
            return Err(Error::Format(format!("unexpected coherence header {header:?}")));
        }
        let mut alpha = Vec::new();
        let mut method = None;
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 3 {
                return Err(Error::Format(format!("coherence row {row}: expected 3 fields")));
            }
            let idx: usize = f[0].parse().map_err(|_| Error::Format(format!("bad index {:?}", f[0])))?;
            if idx != alpha.len() {
                return Err(Error::Format(format!("coherence row {row}: index {idx} out of sequence")));
            }
            alpha.push(f[1].parse().map_err(|_| Error::Format(format!("bad alpha {:?}", f[1])))?);
            let m: CoherenceMethod = f[2].parse()?;
            if method.is_some_and(|prev| prev != m) {
                return Err(Error::Format("mixed coherence methods".into()));
            }
            method = Some(m);
        }
        let method = method.ok_or_else(|| Error::Format("no coherence rows".into()))?;
        CoherenceVector::new(alpha, method, "csv")
    }
}

/// Largest eigenvalue of the Gram matrix of two vectors `a`, `b`.
fn top_eig_2(aa: f64, bb: f64, ab: f64) -> f64 {
    let mid = 0.5 * (aa + bb);
    let half = 0.5 * (aa - bb);
    (mid + (half * half + ab * ab).sqrt()).max(0.0)
}

/// `sup |f^* x|` over real unit `x` in the span of the orthonormal `basis`:
/// the largest singular value of the `2 x l` matrix stacking
/// `basis^T Re f` and `basis^T Im f`.
pub fn subspace_row_coherence(f: &[Complex64], basis: &DMatrix<f64>) -> f64 {
    assert_eq!(f.len(), basis.nrows(), "row length mismatch");
    let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
    for c in 0..basis.ncols() {
        let col = basis.column(c);
        let (mut a, mut b) = (0.0, 0.0);
        for (z, v) in f.iter().zip(col.iter()) {
            a += z.re * v;
            b += z.im * v;
        }
        aa += a * a;
        bb += b * b;
        ab += a * b;
    }
    top_eig_2(aa, bb, ab).sqrt()
}

/// `F B` for a real basis `B`, column by column; entry `(j, c)` is `f_j^* b_c`.
fn apply_to_basis(f: &UnitaryOperator, basis: &DMatrix<f64>) -> Vec<Vec<Complex64>> {
    (0..basis.ncols()).map(|c| f.forward_real(basis.column(c).as_slice())).collect()
}

fn coherences_from_image(cols: &[Vec<Complex64>], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
            for col in cols {
                let z = col[j];
                aa += z.re * z.re;
                bb += z.im * z.im;
                ab += z.re * z.im;
            }
            top_eig_2(aa, bb, ab).sqrt()
        })
        .collect()
}

/// Per-row coherences with a single subspace.
pub fn subspace_coherences(f: &UnitaryOperator, s: &Subspace) -> Result<Vec<f64>> {
    if s.ambient_dim() != f.n() {
        return Err(Error::Dimension(format!("subspace in R^{} vs operator of size {}", s.ambient_dim(), f.n())));
    }
    Ok(coherences_from_image(&apply_to_basis(f, s.basis()), f.n()))
}

/// Exact local coherences with respect to a union of subspaces.
pub fn coherence_vector(f: &UnitaryOperator, t: &SubspaceUnion) -> Result<CoherenceVector> {
    if t.ambient_dim() != f.n() {
        return Err(Error::Dimension(format!("union in R^{} vs operator of size {}", t.ambient_dim(), f.n())));
    }
    let n = f.n();
    let alpha = t
        .subspaces()
        .par_iter()
        .map(|s| coherences_from_image(&apply_to_basis(f, s.basis()), n))
        .reduce(|| vec![0.0; n], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    CoherenceVector::new(
        alpha,
        CoherenceMethod::Exact,
        format!("{} over union(M={}, l={})", f.describe(), t.count(), t.max_dim()),
    )
}

/// `sqrt` of the sum of the `s` largest `|f_i|^2`: an upper bound on the
/// coherence of `f` with the `s`-sparse vectors.
pub fn sparse_coherence_upper(f: &[Complex64], s: usize) -> f64 {
    let mut mags: Vec<f64> = f.iter().map(|z| z.norm_sqr()).collect();
    let s = s.min(mags.len());
    if s == 0 {
        return 0.0;
    }
    mags.select_nth_unstable_by(s - 1, |a, b| b.total_cmp(a));
    let mut top = mags[..s].to_vec();
    top.sort_by(|a, b| a.total_cmp(b));
    top.iter().sum::<f64>().sqrt()
}

/// `sparse_coherence_upper` for every row of `f`.
pub fn sparse_coherence_upper_vector(f: &UnitaryOperator, s: usize) -> Result<CoherenceVector> {
    if s == 0 || s > f.n() {
        return Err(Error::InvalidArgument(format!("sparsity {s} not in 1..={}", f.n())));
    }
    let alpha: Vec<f64> = (0..f.n())
        .into_par_iter()
        .map(|j| sparse_coherence_upper(&f.row_vector(j).expect("row in range"), s))
        .collect();
    CoherenceVector::new(alpha, CoherenceMethod::UpperBound, format!("{} over {s}-sparse", f.describe()))
}

/// Exact real coherence of `f` with the `s`-sparse vectors, by enumerating
/// all supports.
pub fn sparse_row_coherence_exact(f: &[Complex64], s: usize) -> f64 {
    let n = f.len();
    let s = s.min(n);
    Combinations::new(n, s)
        .map(|support| {
            let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
            for &i in &support {
                aa += f[i].re * f[i].re;
                bb += f[i].im * f[i].im;
                ab += f[i].re * f[i].im;
            }
            top_eig_2(aa, bb, ab).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Exact sparse coherence vector; only for `n <= EXACT_SPARSE_MAX_N`.
pub fn sparse_coherence_exact_vector(f: &UnitaryOperator, s: usize) -> Result<CoherenceVector> {
    if f.n() > EXACT_SPARSE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "exact sparse coherence limited to n <= {EXACT_SPARSE_MAX_N}, got {}",
            f.n()
        )));
    }
    if s == 0 || s > f.n() {
        return Err(Error::InvalidArgument(format!("sparsity {s} not in 1..={}", f.n())));
    }
    let alpha: Vec<f64> = (0..f.n())
        .into_par_iter()
        .map(|j| sparse_row_coherence_exact(&f.row_vector(j).expect("row in range"), s))
        .collect();
    CoherenceVector::new(alpha, CoherenceMethod::Exact, format!("{} over {s}-sparse", f.describe()))
}

/// Estimates coherences of a generative prior from `num_latents` samples
/// `G(z_i)`: `alpha_j` is the largest `|(F x_a - F x_b)_j| / ||x_a - x_b||`
/// over all sample pairs. Pairs with `x_a = x_b` are skipped.
pub fn empirical_generative_coherence(
    g: &GenerativeNetwork,
    f: &UnitaryOperator,
    num_latents: usize,
    seed: u64,
) -> Result<CoherenceVector> {
    if num_latents < 2 {
        return Err(Error::InvalidArgument("need at least two latents".into()));
    }
    if g.output_dim() != f.n() {
        return Err(Error::Dimension(format!("network output {} vs operator size {}", g.output_dim(), f.n())));
    }
    let mut r = rng::stream(seed, 88);
    let k = g.latent_dim();
    let signals: Vec<Vec<f64>> = (0..num_latents)
        .map(|_| {
            let z: Vec<f64> = (0..k).map(|_| r.sample(StandardNormal)).collect();
            g.forward(&z)
        })
        .collect();
    let images: Vec<Vec<Complex64>> = signals.par_iter().map(|x| f.forward_real(x)).collect();
    empirical_from_samples(&signals, &images, format!("empirical from {num_latents} latents of {:?}", g.widths()))
}

/// Pairwise-difference estimator from signals and their transforms.
pub fn empirical_from_samples(
    signals: &[Vec<f64>],
    images: &[Vec<Complex64>],
    descriptor: String,
) -> Result<CoherenceVector> {
    let n = images.first().map(|v| v.len()).ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
    let alpha = (0..signals.len())
        .into_par_iter()
        .map(|a| {
            let mut best = vec![0.0f64; n];
            for b in a + 1..signals.len() {
                let dist = signals[a]
                    .iter()
                    .zip(&signals[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if dist == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = (images[a][j] - images[b][j]).norm() / dist;
                    if v > best[j] {
                        best[j] = v;
                    }
                }
            }
            best
        })
        .reduce(|| vec![0.0; n], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    CoherenceVector::new(alpha, CoherenceMethod::Empirical, descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthonormal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Random unit vectors in the span; a lower bound approaching the supremum.
    fn random_search(f: &[Complex64], basis: &DMatrix<f64>, trials: usize, rng: &mut ChaCha8Rng) -> f64 {
        let l = basis.ncols();
        let mut best = 0.0f64;
        for _ in 0..trials {
            let cvec: Vec<f64> = (0..l).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = crate::linalg::norm2(&cvec);
            let x = basis * nalgebra::DVector::from_vec(cvec.iter().map(|v| v / nrm).collect());
            let ip: Complex64 = f.iter().zip(x.iter()).map(|(fi, xi)| fi.conj() * xi).sum();
            best = best.max(ip.norm());
        }
        best
    }

    #[test]
    fn aligned_and_orthogonal_lines() {
        let e1 = [c(1.0, 0.0), c(0.0, 0.0)];
        let b1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(subspace_row_coherence(&e1, &b1), 1.0);
        assert_eq!(subspace_row_coherence(&e1, &b2), 0.0);
    }

    #[test]
    fn closed_form_dominates_and_is_approached() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<Complex64> = (0..8).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let basis = random_orthonormal(&mut rng, 8, 3);
        let exact = subspace_row_coherence(&f, &basis);
        let search = random_search(&f, &basis, 100_000, &mut rng);
        assert!(search <= exact + 1e-12);
        assert!(search >= exact - 1e-3, "{search} vs {exact}");
    }

    #[test]
    fn identity_over_lines_is_flat() {
        let lines: Vec<Subspace> = (0..4).map(|i| Subspace::coordinate(4, &[i]).unwrap()).collect();
        let u = SubspaceUnion::new(lines).unwrap();
        let a = coherence_vector(&UnitaryOperator::identity(4).unwrap(), &u).unwrap();
        assert_eq!(a.alpha, vec![1.0; 4]);
        assert_eq!(a.method, CoherenceMethod::Exact);
    }

    #[test]
    fn dft_against_single_line() {
        let u = SubspaceUnion::new(vec![Subspace::coordinate(4, &[0]).unwrap()]).unwrap();
        let a = coherence_vector(&UnitaryOperator::dft(4).unwrap(), &u).unwrap();
        for v in a.alpha {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn dft_sparse_upper_is_flat_and_exact_is_enumerated() {
        let f = UnitaryOperator::dft(8).unwrap();
        let up = sparse_coherence_upper_vector(&f, 2).unwrap();
        for v in &up.alpha {
            assert!((v - 0.5).abs() < 1e-14);
        }
        // Exhaustive supports through the subspace route.
        let supports: Vec<Subspace> =
            Combinations::new(8, 2).map(|s| Subspace::coordinate(8, &s).unwrap()).collect();
        let via_union = coherence_vector(&f, &SubspaceUnion::new(supports).unwrap()).unwrap();
        let exact = sparse_coherence_exact_vector(&f, 2).unwrap();
        for j in 0..8 {
            assert!((via_union.alpha[j] - exact.alpha[j]).abs() < 1e-12);
            assert!(exact.alpha[j] <= up.alpha[j] + 1e-12);
        }
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(sparse_coherence_upper(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 2), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let f: Vec<Complex64> = (0..6).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
            assert!(sparse_row_coherence_exact(&f, 2) <= sparse_coherence_upper(&f, 2) + 1e-12);
        }
    }

    #[test]
    fn empirical_single_pair_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = GenerativeNetwork::random(&[2, 6, 8], &mut rng).unwrap();
        let f = UnitaryOperator::dft(8).unwrap();
        let a = empirical_generative_coherence(&g, &f, 2, 9).unwrap();
        let mut r = rng::stream(9, 88);
        let z1: Vec<f64> = (0..2).map(|_| r.sample(StandardNormal)).collect();
        let z2: Vec<f64> = (0..2).map(|_| r.sample(StandardNormal)).collect();
        let d: Vec<f64> = g.forward(&z1).iter().zip(g.forward(&z2)).map(|(x, y)| x - y).collect();
        let fd = f.forward_real(&d);
        let nd = crate::linalg::norm2(&d);
        for j in 0..8 {
            assert!((a.alpha[j] - fd[j].norm() / nd).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let a = CoherenceVector::new(vec![0.1, 1.0 / 3.0, 0.0], CoherenceMethod::UpperBound, "t").unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("index,alpha,method\n0,"));
        let b = CoherenceVector::read_csv(&buf[..]).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(b.method, CoherenceMethod::UpperBound);
        assert_eq!(a.excluded(), vec![2]);
    }
}
