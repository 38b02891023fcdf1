//! Small dense linear-algebra helpers shared by the priors, coherence and
//! recovery modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis for the column span of `a`, dropping directions whose
/// singular value is below `rel_tol * sigma_max`. Returns an `n x 0` matrix
/// for a zero input.
pub fn orthonormal_span(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if a.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

/// Maximum entry of `|B^T B - I|`.
pub fn orthonormality_defect(b: &DMatrix<f64>) -> f64 {
    let g = b.transpose() * b;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Embeds a complex `m x l` matrix into `R^{2m x l}` by interleaving real
/// and imaginary parts of each row (the canonical `C^m ~ R^{2m}` map).
pub fn stack_complex(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (m, l) = a.shape();
    DMatrix::from_fn(2 * m, l, |r, c| {
        let z = a[(r / 2, c)];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    })
}

pub fn stack_complex_vec(b: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * b.len(), b.iter().flat_map(|z| [z.re, z.im]))
}

/// Result of a rank-revealing least-squares solve.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: DVector<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Minimum-norm least squares through the SVD, truncating singular values
/// below `RANK_TOL * sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let cols = a.ncols();
    if cols == 0 {
        return LeastSquares { x: DVector::zeros(0), rank: 0, rank_deficient: false };
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_TOL * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    let x = if smax == 0.0 {
        DVector::zeros(cols)
    } else {
        svd.solve(b, cutoff).expect("U and V^T were computed")
    };
    LeastSquares { x, rank, rank_deficient: rank < cols }
}

/// Extreme singular values `(sigma_min, sigma_max)` of `a`, counting the
/// implicit zeros when `a` has more columns than rows.
pub fn extreme_singular_values(a: &DMatrix<f64>) -> (f64, f64) {
    if a.ncols() == 0 {
        return (0.0, 0.0);
    }
    let s = a.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let mut smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if a.ncols() > a.nrows() {
        smin = 0.0;
    }
    (smin, smax)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn cnorm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Random `n x l` matrix with orthonormal columns (Gaussian then orthonormalized).
pub fn random_orthonormal<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, l: usize) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    loop {
        let g = DMatrix::from_fn(n, l, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = orthonormal_span(&g, RANK_TOL);
        if q.ncols() == l {
            return q;
        }
    }
}
