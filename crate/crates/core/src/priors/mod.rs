//! Prior sets contained in unions of subspaces: explicit unions, `k`-sparse
//! vectors and ReLU generative networks.

mod generative;
mod subspace;

use std::cmp::Ordering;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;

pub use generative::{ActivationPattern, GenerativeNetwork};
pub use subspace::{Subspace, SubspaceUnion, BASIS_TOL};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_span, RANK_TOL};
use crate::optim::{minimize_latent, IdentityMap, LatentDescentConfig};
use crate::rng;

/// Residuals within this relative distance are treated as ties.
const TIE_TOL: f64 = 1e-12;

/// The set of `k`-sparse vectors in `R^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SparsePrior {
    n: usize,
    k: usize,
}

impl SparsePrior {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("sparsity {k} not in 1..={n}")));
        }
        Ok(SparsePrior { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Support size of the difference set, `min(2k, n)`.
    pub fn difference_sparsity(&self) -> usize {
        (2 * self.k).min(self.n)
    }

    /// Keeps the `k` largest-magnitude entries; ties go to the lower index.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
        let mut out = vec![0.0; x.len()];
        for &i in idx.iter().take(self.k) {
            out[i] = x[i];
        }
        out
    }
}

/// A prior set.
#[derive(Clone, Debug)]
pub enum Prior {
    Sparse(SparsePrior),
    Union(SubspaceUnion),
    Generative(GenerativeNetwork),
}

impl Prior {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Prior::Sparse(p) => p.n(),
            Prior::Union(u) => u.ambient_dim(),
            Prior::Generative(g) => g.output_dim(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Prior::Sparse(p) => format!("sparse(n={}, k={})", p.n, p.k),
            Prior::Union(u) => format!("union(n={}, M={}, l={})", u.ambient_dim(), u.count(), u.max_dim()),
            Prior::Generative(g) => format!("generative(widths={:?})", g.widths()),
        }
    }

    /// Nearest point of the prior. Exact for sparse priors and subspace
    /// unions; approximate (multi-restart latent descent) for generative
    /// priors.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Prior::Sparse(p) => p.project(x),
            Prior::Union(u) => project_union(u, x),
            Prior::Generative(g) => project_generative(g, x, &LatentDescentConfig::default()),
        }
    }

    /// A random element: uniform support with Gaussian unit-norm values
    /// (sparse), a Gaussian unit-norm point of a uniformly chosen subspace
    /// (union), or `G(z)` with `z ~ N(0, I)` (generative).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Prior::Sparse(p) => {
                let mut x = vec![0.0; p.n];
                for i in sample_indices(rng, p.n, p.k).into_iter() {
                    x[i] = rng.sample(StandardNormal);
                }
                normalize(&mut x);
                x
            }
            Prior::Union(u) => {
                let s = &u.subspaces()[rng.random_range(0..u.count())];
                let c: Vec<f64> = (0..s.dim()).map(|_| rng.sample(StandardNormal)).collect();
                let mut x = (s.basis() * nalgebra::DVector::from_vec(c)).as_slice().to_vec();
                normalize(&mut x);
                x
            }
            Prior::Generative(g) => {
                let z: Vec<f64> = (0..g.latent_dim()).map(|_| rng.sample(StandardNormal)).collect();
                g.forward(&z)
            }
        }
    }
}

fn normalize(x: &mut [f64]) {
    let nrm = crate::linalg::norm2(x);
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

/// Tie-break between equally distant candidates: the first entry where
/// they differ decides, preferring the larger magnitude and then the larger
/// value. `Less` means `a` is preferred. This agrees with keeping the
/// lowest index among equal-magnitude sparse entries.
pub fn lex_prefer(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return y.abs().total_cmp(&x.abs()).then(y.total_cmp(x));
        }
    }
    Ordering::Equal
}

/// Index of the preferred candidate among `(residual, point)` pairs.
pub(crate) fn select_min<'a, I>(candidates: I) -> Option<usize>
where
    I: IntoIterator<Item = (f64, &'a [f64])>,
{
    let mut best: Option<(usize, f64, &[f64])> = None;
    for (i, (r, p)) in candidates.into_iter().enumerate() {
        best = match best {
            None => Some((i, r, p)),
            Some((bi, br, bp)) => {
                let scale = br.abs().max(r.abs()).max(f64::MIN_POSITIVE);
                if (r - br).abs() <= TIE_TOL * scale {
                    if lex_prefer(p, bp) == Ordering::Less {
                        Some((i, r, p))
                    } else {
                        Some((bi, br, bp))
                    }
                } else if r < br {
                    Some((i, r, p))
                } else {
                    Some((bi, br, bp))
                }
            }
        };
    }
    best.map(|(i, _, _)| i)
}

pub fn project_union(u: &SubspaceUnion, x: &[f64]) -> Vec<f64> {
    let projections: Vec<(f64, Vec<f64>)> = u
        .iter()
        .map(|s| {
            let p = s.project(x);
            let r = x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (r, p)
        })
        .collect();
    let i = select_min(projections.iter().map(|(r, p)| (*r, p.as_slice()))).expect("nonempty union");
    projections[i].1.clone()
}

pub fn project_generative(g: &GenerativeNetwork, x: &[f64], config: &LatentDescentConfig) -> Vec<f64> {
    let sol = minimize_latent(g, &IdentityMap(g.output_dim()), x, config, &[]);
    g.forward(&sol.z)
}

/// Options for covering generative difference sets.
#[derive(Clone, Debug)]
pub struct PatternSearch {
    /// Random latent directions probed for activation patterns.
    pub samples: usize,
    pub seed: u64,
}

impl Default for PatternSearch {
    fn default() -> Self {
        PatternSearch { samples: 20_000, seed: 0 }
    }
}

/// A generative difference cover together with its bookkeeping counts.
#[derive(Clone, Debug)]
pub struct GenerativeCover {
    pub union: SubspaceUnion,
    /// Distinct activation patterns `N` found.
    pub patterns: usize,
    /// Pattern pairs before span deduplication, `N (N + 1) / 2`.
    pub pairs: usize,
}

/// A union of subspaces containing `Q - Q`, enumerated explicitly when it
/// has at most `budget` members.
pub fn difference_union(prior: &Prior, budget: u128) -> Result<SubspaceUnion> {
    match prior {
        Prior::Sparse(p) => sparse_difference_union(p, budget),
        Prior::Union(u) => {
            let m = u.count() as u128;
            let pairs = m * (m + 1) / 2;
            if pairs > budget {
                return Err(Error::BudgetExceeded { required: pairs, budget, implicit_available: false });
            }
            Ok(u.pairwise_sums())
        }
        Prior::Generative(g) => Ok(generative_difference_union(g, budget, &PatternSearch::default())?.union),
    }
}

pub fn sparse_difference_union(p: &SparsePrior, budget: u128) -> Result<SubspaceUnion> {
    let s = p.difference_sparsity();
    let required = binomial(p.n, s).unwrap_or(u128::MAX);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget, implicit_available: true });
    }
    let subspaces = Combinations::new(p.n, s)
        .map(|support| Subspace::coordinate(p.n, &support))
        .collect::<Result<Vec<_>>>()?;
    SubspaceUnion::new(subspaces)
}

/// Piecewise-linear expansion of the range difference of `g`: activation
/// patterns are discovered by probing random latent directions (patterns
/// are scale invariant), each pattern contributes the span of its linear
/// piece, and every pair of pieces contributes the sum of their spans.
pub fn generative_difference_union(
    g: &GenerativeNetwork,
    budget: u128,
    search: &PatternSearch,
) -> Result<GenerativeCover> {
    let mut rng = rng::stream(search.seed, 77);
    let k = g.latent_dim();
    let mut patterns: Vec<ActivationPattern> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..search.samples {
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let p = g.pattern(&z);
        if seen.insert(p.clone()) {
            patterns.push(p);
        }
    }
    let n_pat = patterns.len() as u128;
    let pairs = n_pat * (n_pat + 1) / 2;
    if pairs > budget {
        return Err(Error::BudgetExceeded { required: pairs, budget, implicit_available: false });
    }
    let pieces: Vec<nalgebra::DMatrix<f64>> = patterns
        .iter()
        .map(|p| orthonormal_span(&g.linear_piece(p), RANK_TOL))
        .collect();
    let n = g.output_dim();
    let mut out: Vec<Subspace> = Vec::new();
    for i in 0..pieces.len() {
        for j in i..pieces.len() {
            let (a, b) = (&pieces[i], &pieces[j]);
            let mut joined = nalgebra::DMatrix::zeros(n, a.ncols() + b.ncols());
            joined.columns_mut(0, a.ncols()).copy_from(a);
            joined.columns_mut(a.ncols(), b.ncols()).copy_from(b);
            if let Ok(s) = Subspace::from_spanning(&joined) {
                subspace::push_unique(&mut out, s);
            }
        }
    }
    Ok(GenerativeCover { union: SubspaceUnion::new(out)?, patterns: patterns.len(), pairs: pairs as usize })
}

/// `(log M, l)` for a union of subspaces covering `Q - Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceCountBound {
    /// Closed-form bound on `log M` as used in the recovery guarantees.
    pub log_m_bound: f64,
    /// A bound that provably dominates `log M` (differs from `log_m_bound`
    /// only for sparse priors, where it carries the missing factor `e`).
    pub log_m_upper: f64,
    pub ell: usize,
}

pub fn subspace_count_bounds(prior: &Prior) -> SubspaceCountBound {
    match prior {
        Prior::Sparse(p) => {
            let s = p.difference_sparsity();
            if s >= p.n {
                return SubspaceCountBound { log_m_bound: 0.0, log_m_upper: 0.0, ell: p.n };
            }
            let sf = s as f64;
            let ratio = p.n as f64 / sf;
            SubspaceCountBound {
                log_m_bound: sf * ratio.ln(),
                log_m_upper: sf * (std::f64::consts::E * ratio).ln(),
                ell: s,
            }
        }
        Prior::Generative(g) => {
            let w = g.widths();
            let k = w[0] as f64;
            let d = g.depth();
            let log_n: f64 = (1..d).map(|i| (2.0 * std::f64::consts::E * w[i] as f64 / k).ln()).sum::<f64>() * k;
            let b = 2.0 * log_n;
            SubspaceCountBound { log_m_bound: b, log_m_upper: b, ell: (2 * w[0]).min(g.output_dim()) }
        }
        Prior::Union(u) => {
            let m = u.count() as f64;
            let b = (m * (m + 1.0) / 2.0).ln();
            SubspaceCountBound { log_m_bound: b, log_m_upper: b, ell: (2 * u.max_dim()).min(u.ambient_dim()) }
        }
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Lexicographic iterator over `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        Combinations { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_difference_union_enumerates_planes() {
        let u = sparse_difference_union(&SparsePrior::new(4, 1).unwrap(), 1000).unwrap();
        assert_eq!(u.count(), 6);
        assert_eq!(u.max_dim(), 2);
    }

    #[test]
    fn sparse_budget_error_reports_implicit_handle() {
        let err = sparse_difference_union(&SparsePrior::new(64, 5).unwrap(), 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { implicit_available: true, .. }));
    }

    #[test]
    fn union_difference_is_pairwise_sum() {
        let e1 = Subspace::coordinate(3, &[0]).unwrap();
        let e2 = Subspace::coordinate(3, &[1]).unwrap();
        let u = SubspaceUnion::new(vec![e1.clone(), e2.clone(), e1.clone()]).unwrap();
        let d = difference_union(&Prior::Union(u), 100).unwrap();
        // span e1, span e1+e2, span e2 after deduplication
        assert_eq!(d.count(), 3);
        assert!(d.contains(&[1.0, -2.0, 0.0], 1e-12));
        assert!(!d.contains(&[0.0, 0.0, 1.0], 1e-12));
    }

    #[test]
    fn count_bounds_closed_forms() {
        let b = subspace_count_bounds(&Prior::Sparse(SparsePrior::new(64, 2).unwrap()));
        assert_eq!(b.ell, 4);
        assert!((b.log_m_bound - 4.0 * 16f64.ln()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = GenerativeNetwork::random(&[2, 4, 8], &mut rng).unwrap();
        let b = subspace_count_bounds(&Prior::Generative(g));
        assert_eq!(b.ell, 4);
        let expect = 2.0 * 2.0 * (2.0 * std::f64::consts::E * 4.0 / 2.0).ln();
        assert!((b.log_m_bound - expect).abs() < 1e-12);

        let b = subspace_count_bounds(&Prior::Sparse(SparsePrior::new(4, 2).unwrap()));
        assert_eq!(b.ell, 4);
        assert_eq!(binomial(4, 4), Some(1));
        assert!(b.log_m_bound >= 0.0);
    }

    #[test]
    fn sparse_projection_cases() {
        let p = SparsePrior::new(4, 1).unwrap();
        assert_eq!(p.project(&[3.0, 1.0, 0.0, 0.0]), vec![3.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.project(&[1.0, -1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn union_projection_cases() {
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let s = Subspace::from_spanning(&v).unwrap();
        let u = SubspaceUnion::new(vec![s]).unwrap();
        let p = project_union(&u, &[1.0, 0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2].abs() < 1e-15);

        // Equal residuals: the tie rule picks (1, 0) over (0, 1) in either order.
        let e1 = Subspace::coordinate(2, &[0]).unwrap();
        let e2 = Subspace::coordinate(2, &[1]).unwrap();
        let u = SubspaceUnion::new(vec![e2.clone(), e1.clone()]).unwrap();
        assert_eq!(project_union(&u, &[1.0, 1.0]), vec![1.0, 0.0]);
        let u = SubspaceUnion::new(vec![e1, e2]).unwrap();
        assert_eq!(project_union(&u, &[1.0, 1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(Combinations::new(3, 3).count(), 1);
        assert_eq!(binomial(64, 4), Some(635_376));
    }

    #[test]
    fn random_points_lie_in_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prior = Prior::Sparse(SparsePrior::new(10, 3).unwrap());
        let x = prior.random_point(&mut rng);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 3);
        assert!((crate::linalg::norm2(&x) - 1.0).abs() < 1e-12);
    }
}
