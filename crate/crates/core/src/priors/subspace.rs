use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_span, orthonormality_defect, RANK_TOL};

/// Orthonormality tolerance for subspace bases.
pub const BASIS_TOL: f64 = 1e-10;

/// A subspace of `R^n` given by an `n x dim` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.nrows() == 0 {
            return Err(Error::Dimension("subspace must be nontrivial".into()));
        }
        if basis.ncols() > basis.nrows() {
            return Err(Error::Dimension(format!(
                "basis has {} columns in dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        let defect = orthonormality_defect(&basis);
        if defect > BASIS_TOL {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Subspace { basis })
    }

    /// Span of the columns of `vectors`, orthonormalized with rank detection.
    pub fn from_spanning(vectors: &DMatrix<f64>) -> Result<Self> {
        let q = orthonormal_span(vectors, RANK_TOL);
        if q.ncols() == 0 {
            return Err(Error::Dimension("spanning set is zero".into()));
        }
        Ok(Subspace { basis: q })
    }

    /// Coordinate subspace `span{e_i : i in support}`.
    pub fn coordinate(n: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Dimension("empty support".into()));
        }
        let mut basis = DMatrix::zeros(n, support.len());
        for (c, &i) in support.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            basis[(i, c)] = 1.0;
        }
        Subspace::new(basis)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Basis coordinates `B^T x`.
    pub fn coordinates(&self, x: &[f64]) -> DVector<f64> {
        self.basis.tr_mul(&DVector::from_column_slice(x))
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (&self.basis * self.coordinates(x)).as_slice().to_vec()
    }

    /// Distance from `x` to the subspace.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let p = self.project(x);
        x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.residual(x) <= tol
    }

    /// Whether both subspaces have the same span.
    pub fn same_span(&self, other: &Subspace, tol: f64) -> bool {
        if self.dim() != other.dim() || self.ambient_dim() != other.ambient_dim() {
            return false;
        }
        let back = &self.basis * self.basis.tr_mul(&other.basis);
        (back - &other.basis).amax() <= tol
    }

    /// `self + other`, orthonormalized.
    pub fn sum(&self, other: &Subspace) -> Subspace {
        let n = self.ambient_dim();
        let mut joined = DMatrix::zeros(n, self.dim() + other.dim());
        joined.columns_mut(0, self.dim()).copy_from(&self.basis);
        joined.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        Subspace { basis: orthonormal_span(&joined, RANK_TOL) }
    }
}

/// A finite union of subspaces of a common ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceUnion {
    n: usize,
    subspaces: Vec<Subspace>,
}

impl SubspaceUnion {
    pub fn new(subspaces: Vec<Subspace>) -> Result<Self> {
        let first = subspaces
            .first()
            .ok_or_else(|| Error::Dimension("union of zero subspaces".into()))?;
        let n = first.ambient_dim();
        if let Some(bad) = subspaces.iter().find(|s| s.ambient_dim() != n) {
            return Err(Error::Dimension(format!(
                "mixed ambient dimensions {n} and {}",
                bad.ambient_dim()
            )));
        }
        Ok(SubspaceUnion { n, subspaces })
    }

    /// `count` independent uniformly random subspaces of dimension `dim`.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, count: usize, dim: usize) -> Result<Self> {
        if dim == 0 || dim > n {
            return Err(Error::Dimension(format!("cannot place a {dim}-dimensional subspace in R^{n}")));
        }
        let subspaces = (0..count)
            .map(|_| Subspace::new(crate::linalg::random_orthonormal(rng, n, dim)))
            .collect::<Result<Vec<_>>>()?;
        SubspaceUnion::new(subspaces)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Number of subspaces, `M`.
    pub fn count(&self) -> usize {
        self.subspaces.len()
    }

    /// Largest subspace dimension, `l`.
    pub fn max_dim(&self) -> usize {
        self.subspaces.iter().map(Subspace::dim).max().unwrap_or(0)
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn iter(&self) -> impl Iterator<Item = &Subspace> {
        self.subspaces.iter()
    }

    /// Whether some member subspace contains `x` to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.subspaces.iter().any(|s| s.contains(x, tol))
    }

    /// Pairwise sums `U_i + U_j` for `i <= j`, with identical spans removed.
    pub fn pairwise_sums(&self) -> SubspaceUnion {
        let mut out: Vec<Subspace> = Vec::new();
        for i in 0..self.count() {
            for j in i..self.count() {
                let s = if i == j {
                    self.subspaces[i].clone()
                } else {
                    self.subspaces[i].sum(&self.subspaces[j])
                };
                push_unique(&mut out, s);
            }
        }
        SubspaceUnion { n: self.n, subspaces: out }
    }
}

pub(crate) fn push_unique(out: &mut Vec<Subspace>, s: Subspace) {
    if !out.iter().any(|t| t.same_span(&s, 1e-9)) {
        out.push(s);
    }
}
