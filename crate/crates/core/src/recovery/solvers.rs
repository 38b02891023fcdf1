use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{objective, preconditioned_rhs, stack, system_matrix, unstack, MeasurementSet, RecoveryResult};
use crate::error::{Error, Result};
use crate::linalg::{extreme_singular_values, lstsq, norm2};
use crate::optim::{minimize_latent, LatentDescentConfig, RealLinearMap};
use crate::priors::{select_min, GenerativeNetwork, SparsePrior, Subspace, SubspaceUnion};
use crate::rng;
use crate::sampling::{gather, scatter, DrawnSample, SamplingPlan};
use crate::transforms::{Field, UnitaryOperator};

fn check(f: &UnitaryOperator, plan: &SamplingPlan, sample: &DrawnSample, meas: &MeasurementSet) -> Result<()> {
    if f.n() != plan.n() {
        return Err(Error::Dimension(format!("operator size {} vs plan size {}", f.n(), plan.n())));
    }
    if meas.b.len() != sample.m || meas.omega != sample.omega {
        return Err(Error::InvalidArgument("measurements were not taken with this sample".into()));
    }
    Ok(())
}

/// Exact minimizer of the preconditioned objective over an explicitly
/// enumerated union: least squares in each subspace, best candidate wins
/// (ties broken lexicographically).
pub fn recover_oracle(
    plan: &SamplingPlan,
    sample: &DrawnSample,
    f: &UnitaryOperator,
    meas: &MeasurementSet,
    union: &SubspaceUnion,
) -> Result<RecoveryResult> {
    check(f, plan, sample, meas)?;
    if union.ambient_dim() != f.n() {
        return Err(Error::Dimension(format!("union in R^{} vs operator size {}", union.ambient_dim(), f.n())));
    }
    let rhs = preconditioned_rhs(plan, sample, &meas.b, meas.field);
    let candidates: Vec<(f64, Vec<f64>, bool)> = union
        .subspaces()
        .par_iter()
        .map(|s| {
            let a = system_matrix(f, plan, sample, s.basis(), meas.field);
            let ls = lstsq(&a, &rhs);
            let x = (s.basis() * &ls.x).as_slice().to_vec();
            (objective(plan, sample, f, &x, &meas.b), x, ls.rank_deficient)
        })
        .collect();
    let best = select_min(candidates.iter().map(|(r, x, _)| (*r, x.as_slice()))).expect("nonempty union");
    let (obj, x, deficient) = candidates[best].clone();
    Ok(RecoveryResult {
        x_hat: x,
        objective: obj,
        epsilon: 0.0,
        epsilon_certified: true,
        rre: None,
        solver: format!("oracle(M={})", union.count()),
        iterations: union.count(),
        rank_deficient: deficient,
        converged: true,
        subspace: Some(best),
        support: None,
    })
}

/// The real-linear map `x -> S D F x` on `R^n`, with values stacked as
/// real vectors.
pub struct PreconditionedMap<'a> {
    pub f: &'a UnitaryOperator,
    pub plan: &'a SamplingPlan,
    pub sample: &'a DrawnSample,
    pub field: Field,
}

impl RealLinearMap for PreconditionedMap<'_> {
    fn input_len(&self) -> usize {
        self.f.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = gather(&self.f.forward_real(x), self.plan, self.sample, true);
        stack(&y, self.field).as_slice().to_vec()
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let y = unstack(r, self.field);
        self.f.adjoint(&scatter(&y, self.plan, self.sample, true)).iter().map(|z| z.re).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSolverConfig {
    pub max_iters: usize,
    /// Relative iterate change below which stage 1 stops.
    pub tolerance: f64,
    pub power_iters: usize,
    /// Rounds of single-index support exchange after stage 1 (0 disables).
    pub exchange_rounds: usize,
    /// Off-support indices tried per round, by largest residual
    /// correlation (0 tries all).
    pub exchange_candidates: usize,
    pub seed: u64,
}

impl Default for SparseSolverConfig {
    fn default() -> Self {
        SparseSolverConfig {
            max_iters: 1000,
            tolerance: 1e-10,
            power_iters: 60,
            exchange_rounds: 50,
            exchange_candidates: 32,
            seed: 0,
        }
    }
}

fn top_k_support(x: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut s: Vec<usize> = idx[..k].to_vec();
    s.sort_unstable();
    s
}

fn support_fit(
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    meas: &MeasurementSet,
    rhs: &nalgebra::DVector<f64>,
    support: &[usize],
) -> Result<(Vec<f64>, f64, bool)> {
    let basis = Subspace::coordinate(f.n(), support)?;
    let a = system_matrix(f, plan, sample, basis.basis(), meas.field);
    let ls = lstsq(&a, rhs);
    let mut x = vec![0.0; f.n()];
    for (i, &j) in support.iter().enumerate() {
        x[j] = ls.x[i];
    }
    Ok((x.clone(), objective(plan, sample, f, &x, &meas.b), ls.rank_deficient))
}

/// Residual energy `||y||^2 - c^T x` of the least-squares fit on the
/// columns `idx` of a Gram system, or `None` when those columns are
/// numerically dependent.
fn gram_residual(gram: &DMatrix<f64>, c: &DVector<f64>, yy: f64, idx: &[usize]) -> Option<f64> {
    let g = DMatrix::from_fn(idx.len(), idx.len(), |i, j| gram[(idx[i], idx[j])]);
    let cs = DVector::from_fn(idx.len(), |i, _| c[idx[i]]);
    let chol = g.cholesky()?;
    let l = chol.l();
    let dmin = (0..idx.len()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    let dmax = (0..idx.len()).map(|i| l[(i, i)]).fold(0.0, f64::max);
    if !(dmin > 1e-7 * dmax) {
        return None;
    }
    Some(yy - cs.dot(&chol.solve(&cs)))
}

/// Best-improvement single swaps (one index out, one in) until no swap
/// lowers the residual. Candidates entering the support are the off-support
/// indices with the largest correlation against the current residual.
#[allow(clippy::too_many_arguments)]
fn exchange_support(
    map: &PreconditionedMap,
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    field: Field,
    y: &DVector<f64>,
    mut x: Vec<f64>,
    mut support: Vec<usize>,
    config: &SparseSolverConfig,
) -> Vec<usize> {
    let n = f.n();
    let yy = y.norm_squared();
    for _ in 0..config.exchange_rounds {
        let ax = map.apply(&x);
        let resid: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let g = map.apply_transpose(&resid);
        let mut off: Vec<usize> = (0..n).filter(|j| support.binary_search(j).is_err()).collect();
        off.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
        if config.exchange_candidates > 0 {
            off.truncate(config.exchange_candidates);
        }
        let cols: Vec<usize> = support.iter().chain(&off).copied().collect();
        let basis = DMatrix::from_fn(n, cols.len(), |r, c| if cols[c] == r { 1.0 } else { 0.0 });
        let a = system_matrix(f, plan, sample, &basis, field);
        let gram = a.tr_mul(&a);
        let c = a.tr_mul(y);
        let k = support.len();
        let own: Vec<usize> = (0..k).collect();
        let Some(current) = gram_residual(&gram, &c, yy, &own) else {
            break;
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for out in 0..k {
            for inn in k..cols.len() {
                let mut idx = own.clone();
                idx[out] = inn;
                if let Some(v) = gram_residual(&gram, &c, yy, &idx) {
                    if best.is_none_or(|b| v < b.0) {
                        best = Some((v, out, inn));
                    }
                }
            }
        }
        match best {
            Some((v, out, inn)) if v < current - 1e-12 * yy.max(f64::MIN_POSITIVE) => {
                support[out] = cols[inn];
                support.sort_unstable();
                let sub = Subspace::coordinate(n, &support).expect("valid support");
                let ls = lstsq(&system_matrix(f, plan, sample, sub.basis(), field), y);
                x = vec![0.0; n];
                for (i, &j) in support.iter().enumerate() {
                    x[j] = ls.x[i];
                }
            }
            _ => break,
        }
    }
    support
}

/// Two-stage sparse recovery: iterative hard thresholding with step `1/L`
/// (`L` the power-iteration estimate of `||S D F||^2`) picks a support of
/// size `k`, then least squares on that support. Every support visited by
/// stage 1 is refit and the best fit is kept; that support is then improved
/// by single-index exchanges before the final fit.
pub fn recover_sparse_two_stage(
    plan: &SamplingPlan,
    sample: &DrawnSample,
    f: &UnitaryOperator,
    meas: &MeasurementSet,
    k: usize,
    config: &SparseSolverConfig,
) -> Result<RecoveryResult> {
    check(f, plan, sample, meas)?;
    let prior = SparsePrior::new(f.n(), k)?;
    let map = PreconditionedMap { f, plan, sample, field: meas.field };
    let rhs = preconditioned_rhs(plan, sample, &meas.b, meas.field);
    let y = rhs.as_slice();
    let n = f.n();

    let mut r = rng::stream(config.seed, rng::streams::SOLVER);
    let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let mut l = 0.0;
    for _ in 0..config.power_iters.max(1) {
        let nv = norm2(&v);
        v.iter_mut().for_each(|e| *e /= nv);
        let w = map.apply_transpose(&map.apply(&v));
        l = norm2(&w);
        v = w;
    }
    if !(l > 0.0) {
        return Err(Error::InvalidArgument("measurement operator vanishes".into()));
    }
    // Power iteration approaches the top eigenvalue from below.
    let step = 1.0 / (1.01 * l);

    let mut x = vec![0.0; n];
    let mut best: Option<(Vec<f64>, f64, bool, Vec<usize>)> = None;
    let mut last_support: Option<Vec<usize>> = None;
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..config.max_iters {
        iters += 1;
        let ax = map.apply(&x);
        let resid: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let g = map.apply_transpose(&resid);
        let cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
        let next = prior.project(&cand);
        let support = top_k_support(&next, k);
        if last_support.as_ref() != Some(&support) {
            let (xf, obj, deficient) = support_fit(f, plan, sample, meas, &rhs, &support)?;
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((xf, obj, deficient, support.clone()));
            }
            last_support = Some(support);
        }
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = norm2(&next);
        x = next;
        if change <= config.tolerance * scale.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let (mut x_hat, mut obj, mut deficient, mut support) = best.expect("at least one iteration");
    if config.exchange_rounds > 0 && k < n {
        let refined = exchange_support(&map, f, plan, sample, meas.field, &rhs, x_hat.clone(), support.clone(), config);
        if refined != support {
            let (xf, o, d) = support_fit(f, plan, sample, meas, &rhs, &refined)?;
            if o < obj {
                (x_hat, obj, deficient, support) = (xf, o, d, refined);
            }
        }
    }
    Ok(RecoveryResult {
        x_hat,
        objective: obj,
        epsilon: 0.0,
        epsilon_certified: false,
        rre: None,
        solver: format!("iht+ls(k={k})"),
        iterations: iters,
        rank_deficient: deficient,
        converged,
        subspace: None,
        support: Some(support),
    })
}

/// Multi-restart latent descent on `||D~ S F G(z) - D~ b||^2`. The reported
/// `epsilon` is the achieved objective, an upper bound on the gap to the
/// global minimum over the range of `G`.
pub fn recover_generative(
    plan: &SamplingPlan,
    sample: &DrawnSample,
    f: &UnitaryOperator,
    meas: &MeasurementSet,
    g: &GenerativeNetwork,
    config: &LatentDescentConfig,
    initial: &[Vec<f64>],
) -> Result<RecoveryResult> {
    check(f, plan, sample, meas)?;
    if g.output_dim() != f.n() {
        return Err(Error::Dimension(format!("network output {} vs operator size {}", g.output_dim(), f.n())));
    }
    let map = PreconditionedMap { f, plan, sample, field: meas.field };
    let rhs = preconditioned_rhs(plan, sample, &meas.b, meas.field);
    let sol = minimize_latent(g, &map, rhs.as_slice(), config, initial);
    let x_hat = g.forward(&sol.z);
    let obj = objective(plan, sample, f, &x_hat, &meas.b);
    Ok(RecoveryResult {
        x_hat,
        objective: obj,
        epsilon: obj,
        epsilon_certified: false,
        rre: None,
        solver: format!("latent-descent(restarts={})", config.restarts),
        iterations: sol.iterations,
        rank_deficient: false,
        converged: true,
        subspace: None,
        support: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RipReport {
    pub max_deviation: f64,
    pub holds: bool,
    pub per_subspace: Vec<f64>,
}

/// RIP threshold on `| ||A u|| - 1 |`.
pub const RIP_THRESHOLD: f64 = 1.0 / 3.0;

/// Constant `C` of `sample_complexity` calibrated for the RIP at
/// `RIP_THRESHOLD` with failure probability `delta`; see
/// `examples/calibrate_rip.rs`.
pub const CALIBRATED_RIP_C: f64 = 1.1;

/// Exact RIP deviation of `S D F` on each subspace, from the extreme
/// singular values of the stacked real matrix `S D F B`.
pub fn rip_check(plan: &SamplingPlan, sample: &DrawnSample, f: &UnitaryOperator, union: &SubspaceUnion) -> RipReport {
    let per_subspace: Vec<f64> = union
        .subspaces()
        .par_iter()
        .map(|s| {
            let a = system_matrix(f, plan, sample, s.basis(), Field::Complex);
            let (lo, hi) = extreme_singular_values(&a);
            (hi - 1.0).max(1.0 - lo)
        })
        .collect();
    let max_deviation = per_subspace.iter().cloned().fold(0.0, f64::max);
    RipReport { max_deviation, holds: max_deviation <= RIP_THRESHOLD, per_subspace }
}

/// Dense `S D F B` as a complex matrix, for tests and diagnostics.
pub fn dense_system(
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    basis: &DMatrix<f64>,
) -> DMatrix<Complex64> {
    let cols: Vec<Vec<Complex64>> = (0..basis.ncols())
        .map(|c| gather(&f.forward_real(basis.column(c).as_slice()), plan, sample, true))
        .collect();
    DMatrix::from_fn(sample.m, basis.ncols(), |r, c| cols[c][r])
}
