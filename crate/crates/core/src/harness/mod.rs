//! Seeded experiment sweeps over `(m, sigma, scheme)`, geometric
//! aggregation and log-log slope fits.

mod config;
mod io;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    logspace_grid, CoherenceChoice, ExperimentConfig, MeasurementKind, PriorKind, Scheme, SignalKind, SolverKind,
    SparsityKind,
};
pub use io::{load_image_pgm, load_union, parse_pgm, read_union, sparsify_in_basis, write_pgm, write_union, Sparsified};

use crate::coherence::{
    coherence_vector, empirical_generative_coherence, sparse_coherence_exact_vector, sparse_coherence_upper_vector,
    CoherenceVector,
};
use crate::error::{Error, Result};
use crate::priors::{
    difference_union, subspace_count_bounds, Combinations, GenerativeNetwork, Prior, SparsePrior, Subspace,
    SubspaceCountBound, SubspaceUnion,
};
use crate::recovery::{
    deterministic_corollary_bound, recover_generative, recover_oracle, recover_sparse_two_stage, simulate_measurements,
    theorem_error_bound, Confidence, ModelMismatch, RecoveryResult,
};
use crate::rng;
use crate::sampling::{draw_sample, noise_factor, DrawnSample, SamplingPlan};
use crate::transforms::UnitaryOperator;

/// Value substituted for zero errors before taking logs.
pub const RRE_FLOOR: f64 = 1e-15;
/// Largest union the oracle solver enumerates from a sparse prior.
pub const ORACLE_BUDGET: u128 = 2_000_000;

pub const RECORD_HEADER: &str =
    "scheme,m,sigma,trial,seed,rre,objective,noise_factor,theorem_bound,corollary_bound,wall_time_ms";

/// One trial of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub scheme: Scheme,
    pub m: usize,
    pub sigma: f64,
    pub trial: usize,
    pub seed: u64,
    /// NaN when the trial failed.
    pub rre: f64,
    pub objective: f64,
    /// NaN when undefined for the draw.
    pub noise_factor: f64,
    pub theorem_bound: f64,
    pub corollary_bound: f64,
    pub wall_time_ms: f64,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

impl ExperimentRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme.name(),
            self.m,
            fmt_f(self.sigma),
            self.trial,
            self.seed,
            fmt_f(self.rre),
            fmt_f(self.objective),
            fmt_f(self.noise_factor),
            fmt_f(self.theorem_bound),
            fmt_f(self.corollary_bound),
            fmt_f(self.wall_time_ms),
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return Err(Error::Format(format!("expected 11 fields, found {}", f.len())));
        }
        let num = |i: usize| -> Result<f64> { f[i].parse().map_err(|_| Error::Format(format!("bad number {:?}", f[i]))) };
        let int = |i: usize| -> Result<u64> { f[i].parse().map_err(|_| Error::Format(format!("bad integer {:?}", f[i]))) };
        Ok(ExperimentRecord {
            scheme: f[0].parse().map_err(|_| Error::Format(format!("bad scheme {:?}", f[0])))?,
            m: int(1)? as usize,
            sigma: num(2)?,
            trial: int(3)? as usize,
            seed: int(4)?,
            rre: num(5)?,
            objective: num(6)?,
            noise_factor: num(7)?,
            theorem_bound: num(8)?,
            corollary_bound: num(9)?,
            wall_time_ms: num(10)?,
        })
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.to_csv_row())?;
    }
    Ok(())
}

pub fn read_records<R: std::io::BufRead>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != RECORD_HEADER {
        return Err(Error::Format(format!("unexpected record header {header:?}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(ExperimentRecord::from_csv_row(&line)?);
        }
    }
    Ok(out)
}

/// Everything derived once from a configuration: operator, prior,
/// coherences and plans.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub operator: UnitaryOperator,
    /// The sparsity basis when signals are coefficient vectors.
    pub sparsity: Option<UnitaryOperator>,
    pub prior: Prior,
    pub alpha: CoherenceVector,
    pub counts: SubspaceCountBound,
    /// Explicit union for the oracle solver (the prior set itself).
    pub oracle_union: Option<SubspaceUnion>,
    /// Fixed ground truth (from `image_file`), if any.
    pub fixed_truth: Option<Vec<f64>>,
    plans: BTreeMap<Scheme, SamplingPlan>,
}

fn measurement_operator(c: &ExperimentConfig, n: usize) -> Result<(UnitaryOperator, Option<UnitaryOperator>)> {
    let side = (n as f64).sqrt().round() as usize;
    let two_d = c.measurement == MeasurementKind::Dft2d;
    if two_d && side * side != n {
        return Err(Error::Config(format!("dft2d needs a square signal length, got {n}")));
    }
    let phi = match c.measurement {
        MeasurementKind::Dft => UnitaryOperator::dft(n)?,
        MeasurementKind::Dft2d => UnitaryOperator::dft2d(side)?,
        MeasurementKind::Identity => UnitaryOperator::identity(n)?,
    };
    match c.sparsity_basis {
        SparsityKind::Identity => Ok((phi, None)),
        SparsityKind::Haar => {
            let w = if two_d { UnitaryOperator::haar2d(side, c.haar_levels)? } else { UnitaryOperator::haar(n, c.haar_levels)? };
            Ok((UnitaryOperator::compose(&phi, &w)?, Some(w)))
        }
    }
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut fixed_truth = None;
        let (operator, sparsity, prior) = match c.prior {
            PriorKind::Sparse => {
                let k = c.k.expect("validated");
                let image = match &c.image_file {
                    Some(p) => Some(load_image_pgm(p)?),
                    None => None,
                };
                let n = match (&image, c.n) {
                    (Some((px, _)), Some(n)) if px.len() != n => {
                        return Err(Error::Config(format!("n = {n} but image has {} pixels", px.len())))
                    }
                    (Some((px, _)), _) => px.len(),
                    (None, Some(n)) => n,
                    (None, None) => unreachable!("validated"),
                };
                let (op, w) = measurement_operator(c, n)?;
                if let Some((px, _)) = image {
                    let basis = match &w {
                        Some(w) => w.clone(),
                        None => UnitaryOperator::identity(n)?,
                    };
                    fixed_truth = Some(sparsify_in_basis(&px, &basis, k)?.coefficients);
                }
                (op, w, Prior::Sparse(SparsePrior::new(n, k)?))
            }
            PriorKind::Union => {
                let u = load_union(c.union_file.as_ref().expect("validated"))?;
                let (op, w) = measurement_operator(c, u.ambient_dim())?;
                (op, w, Prior::Union(u))
            }
            PriorKind::Generative => {
                let g = GenerativeNetwork::load(c.weights_file.as_ref().expect("validated"))?;
                let (op, w) = measurement_operator(c, g.output_dim())?;
                (op, w, Prior::Generative(g))
            }
        };
        let alpha = compute_alpha(c, &operator, &prior)?;
        let counts = subspace_count_bounds(&prior);
        let solver = resolved_solver(c.solver, &prior);
        let oracle_union = match (&prior, solver) {
            (Prior::Union(u), _) => Some(u.clone()),
            (Prior::Sparse(p), SolverKind::Oracle) => Some(sparse_support_union(p)?),
            _ => None,
        };
        let mut plans = BTreeMap::new();
        plans.insert(Scheme::Optimized, SamplingPlan::optimized(&alpha)?);
        plans.insert(Scheme::Uniform, SamplingPlan::uniform(operator.n())?.with_alpha(alpha.clone())?);
        if let Some(p) = &c.custom_p_file {
            let plan = SamplingPlan::read_csv(std::io::BufReader::new(std::fs::File::open(p)?))?;
            if plan.n() != operator.n() {
                return Err(Error::Config(format!("custom plan has {} rows, operator {}", plan.n(), operator.n())));
            }
            plans.insert(Scheme::Custom, plan.with_alpha(alpha.clone())?);
        }
        Ok(Experiment { config, operator, sparsity, prior, alpha, counts, oracle_union, fixed_truth, plans })
    }

    pub fn plan(&self, scheme: Scheme) -> Result<&SamplingPlan> {
        self.plans.get(&scheme).ok_or_else(|| Error::Config(format!("no plan for scheme {}", scheme.name())))
    }

    /// Per-trial seed shared by every scheme and noise level with the same
    /// `(m index, trial)`, so compared cells see identical signals and noise.
    pub fn trial_seed(&self, m_index: usize, trial: usize) -> u64 {
        rng::derive(self.config.master_seed, m_index as u64, trial as u64)
    }

    pub fn ground_truth(&self, seed: u64) -> Result<Vec<f64>> {
        let mut r = rng::stream(seed, rng::streams::SIGNAL);
        match (&self.fixed_truth, self.config.signal, &self.prior) {
            (Some(x), _, _) => Ok(x.clone()),
            (None, SignalKind::PiecewiseConstant, Prior::Sparse(p)) => {
                let basis = match &self.sparsity {
                    Some(w) => w.clone(),
                    None => UnitaryOperator::identity(p.n())?,
                };
                let x = piecewise_constant(p.n(), self.config.jumps, &mut r);
                let mut c = sparsify_in_basis(&x, &basis, p.k())?.coefficients;
                let nrm = crate::linalg::norm2(&c);
                if nrm == 0.0 {
                    return Err(Error::ZeroSignal);
                }
                c.iter_mut().for_each(|v| *v /= nrm);
                Ok(c)
            }
            _ => Ok(self.prior.random_point(&mut r)),
        }
    }

    /// Runs one recovery; returns the result, the truth and the draw.
    pub fn recover(
        &self,
        scheme: Scheme,
        m: usize,
        sigma: f64,
        seed: u64,
    ) -> Result<(RecoveryResult, Vec<f64>, DrawnSample)> {
        let plan = self.plan(scheme)?;
        let x0 = self.ground_truth(seed)?;
        let sample = draw_sample(plan, m, seed)?;
        let meas = simulate_measurements(&self.operator, plan, &sample, &x0, sigma, self.config.field, seed)?;
        let result = match (resolved_solver(self.config.solver, &self.prior), &self.prior) {
            (SolverKind::Oracle, _) => {
                let u = self.oracle_union.as_ref().ok_or_else(|| Error::Config("oracle needs an explicit union".into()))?;
                recover_oracle(plan, &sample, &self.operator, &meas, u)?
            }
            (SolverKind::TwoStage, Prior::Sparse(p)) => {
                let cfg = crate::recovery::SparseSolverConfig { seed, ..self.config.iht.clone() };
                recover_sparse_two_stage(plan, &sample, &self.operator, &meas, p.k(), &cfg)?
            }
            (SolverKind::Latent, Prior::Generative(g)) => {
                let cfg = crate::optim::LatentDescentConfig { seed, ..self.config.latent.clone() };
                recover_generative(plan, &sample, &self.operator, &meas, g, &cfg, &[])?
            }
            (s, p) => return Err(Error::Config(format!("solver {} does not apply to {}", s.name(), p.describe()))),
        };
        Ok((result.with_truth(&x0)?, x0, sample))
    }

    pub fn run_trial(&self, scheme: Scheme, m_index: usize, sigma: f64, trial: usize) -> ExperimentRecord {
        let m = self.config.m_grid[m_index];
        let seed = self.trial_seed(m_index, trial);
        let start = Instant::now();
        let mut rec = ExperimentRecord {
            scheme,
            m,
            sigma,
            trial,
            seed,
            rre: f64::NAN,
            objective: f64::NAN,
            noise_factor: f64::NAN,
            theorem_bound: f64::NAN,
            corollary_bound: f64::NAN,
            wall_time_ms: 0.0,
        };
        if let Ok((res, _, sample)) = self.recover(scheme, m, sigma, seed) {
            rec.rre = res.rre.unwrap_or(f64::NAN);
            rec.objective = res.objective;
            if let Ok(plan) = self.plan(scheme) {
                rec.noise_factor = noise_factor(plan, &sample, &self.alpha).unwrap_or(f64::NAN);
                rec.theorem_bound = theorem_error_bound(
                    plan,
                    &sample,
                    &self.alpha,
                    sigma,
                    self.counts.ell,
                    self.counts.log_m_bound.max(0.0),
                    Confidence::Delta(self.config.delta),
                    res.epsilon,
                    ModelMismatch::default(),
                )
                .unwrap_or(f64::NAN);
                rec.corollary_bound = deterministic_corollary_bound(&sample, &self.alpha, sigma).unwrap_or(f64::NAN);
            }
        }
        if self.config.timing {
            rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        }
        rec
    }

    /// All `(m, sigma, trial)` cells for one scheme, in grid order.
    pub fn sweep(&self, scheme: Scheme) -> Vec<ExperimentRecord> {
        let c = &self.config;
        let items: Vec<(usize, f64, usize)> = (0..c.m_grid.len())
            .flat_map(|mi| c.sigma_grid.iter().flat_map(move |&s| (0..c.trials).map(move |t| (mi, s, t))))
            .collect();
        items.par_iter().map(|&(mi, s, t)| self.run_trial(scheme, mi, s, t)).collect()
    }
}

/// Piecewise-constant signal with `jumps` breakpoints at distinct random
/// positions and standard-normal levels.
pub fn piecewise_constant<R: rand::Rng + ?Sized>(n: usize, jumps: usize, r: &mut R) -> Vec<f64> {
    let jumps = jumps.min(n.saturating_sub(1));
    let mut cuts: Vec<usize> = rand::seq::index::sample(r, n - 1, jumps).into_iter().map(|i| i + 1).collect();
    cuts.sort_unstable();
    cuts.push(n);
    let mut x = Vec::with_capacity(n);
    let mut start = 0;
    for cut in cuts {
        let level: f64 = r.sample(rand_distr::StandardNormal);
        x.extend(std::iter::repeat_n(level, cut - start));
        start = cut;
    }
    x
}

fn resolved_solver(s: SolverKind, prior: &Prior) -> SolverKind {
    match (s, prior) {
        (SolverKind::Auto, Prior::Sparse(_)) => SolverKind::TwoStage,
        (SolverKind::Auto, Prior::Union(_)) => SolverKind::Oracle,
        (SolverKind::Auto, Prior::Generative(_)) => SolverKind::Latent,
        (s, _) => s,
    }
}

/// All `k`-supports as coordinate subspaces.
fn sparse_support_union(p: &SparsePrior) -> Result<SubspaceUnion> {
    let count = crate::priors::binomial(p.n(), p.k()).unwrap_or(u128::MAX);
    if count > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded { required: count, budget: ORACLE_BUDGET, implicit_available: true });
    }
    let subs = Combinations::new(p.n(), p.k())
        .map(|s| Subspace::coordinate(p.n(), &s))
        .collect::<Result<Vec<_>>>()?;
    SubspaceUnion::new(subs)
}

pub fn compute_alpha(c: &ExperimentConfig, f: &UnitaryOperator, prior: &Prior) -> Result<CoherenceVector> {
    match (c.coherence, prior) {
        (CoherenceChoice::Auto | CoherenceChoice::UpperBound, Prior::Sparse(p)) => {
            sparse_coherence_upper_vector(f, p.difference_sparsity())
        }
        (CoherenceChoice::Exact, Prior::Sparse(p)) => sparse_coherence_exact_vector(f, p.difference_sparsity()),
        (CoherenceChoice::Auto | CoherenceChoice::Exact, Prior::Union(_)) => {
            coherence_vector(f, &difference_union(prior, ORACLE_BUDGET)?)
        }
        (CoherenceChoice::Auto | CoherenceChoice::Empirical, Prior::Generative(g)) => {
            empirical_generative_coherence(g, f, c.coherence_latents, c.master_seed)
        }
        (CoherenceChoice::Exact, Prior::Generative(_)) => {
            coherence_vector(f, &difference_union(prior, ORACLE_BUDGET)?)
        }
        (choice, p) => Err(Error::Config(format!("coherence {} does not apply to {}", choice.name(), p.describe()))),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs the configured scheme over the whole grid. Output order is
/// `(m, sigma, trial)` regardless of scheduling.
pub fn run_denoise_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    let exp = Experiment::new(config.clone())?;
    let scheme = config.scheme;
    Ok(pool(config.threads)?.install(|| exp.sweep(scheme)))
}

/// Geometric mean and geometric standard error of one group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricStats {
    pub geo_mean: f64,
    pub geo_std_error: f64,
    /// Values clamped to `RRE_FLOOR` before taking logs.
    pub clamped: usize,
}

/// `exp(mean log v)` and `exp(std(log v) / sqrt(N))` with the population
/// standard deviation.
pub fn geometric_stats(values: &[f64]) -> Result<GeometricStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty group".into()));
    }
    let mut clamped = 0;
    let logs: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v < RRE_FLOOR {
                clamped += 1;
                RRE_FLOOR.ln()
            } else {
                v.ln()
            }
        })
        .collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    Ok(GeometricStats { geo_mean: mean.exp(), geo_std_error: (var.sqrt() / n.sqrt()).exp(), clamped })
}

/// Aggregate of one `(scheme, m, sigma)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub scheme: Scheme,
    pub m: usize,
    pub sigma: f64,
    pub trials: usize,
    /// Trials with a NaN error, left out of the statistics.
    pub failed: usize,
    pub clamped: usize,
    pub geo_mean_rre: f64,
    pub geo_std_error: f64,
    pub mean_noise_factor: f64,
    pub mean_theorem_bound: f64,
    pub mean_corollary_bound: f64,
}

pub const SUMMARY_HEADER: &str =
    "scheme,m,sigma,trials,failed,clamped,geo_mean_rre,geo_std_error,mean_noise_factor,mean_theorem_bound,mean_corollary_bound";

impl CellSummary {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme.name(),
            self.m,
            fmt_f(self.sigma),
            self.trials,
            self.failed,
            self.clamped,
            fmt_f(self.geo_mean_rre),
            fmt_f(self.geo_std_error),
            fmt_f(self.mean_noise_factor),
            fmt_f(self.mean_theorem_bound),
            fmt_f(self.mean_corollary_bound),
        )
    }
}

fn finite_mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

/// Groups records by `(scheme, m, sigma)` in order of first appearance.
/// Errors on an empty input or a cell whose trials all failed.
pub fn aggregate_geometric(records: &[ExperimentRecord]) -> Result<Vec<CellSummary>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to aggregate".into()));
    }
    let mut keys: Vec<(Scheme, usize, u64)> = Vec::new();
    let mut groups: BTreeMap<(Scheme, usize, u64), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.scheme, r.m, r.sigma.to_bits());
        if !groups.contains_key(&key) {
            keys.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    keys.iter()
        .map(|key| {
            let g = &groups[key];
            let ok: Vec<f64> = g.iter().map(|r| r.rre).filter(|v| !v.is_nan()).collect();
            let stats = geometric_stats(&ok).map_err(|_| {
                Error::InvalidArgument(format!("cell m={} sigma={} has no successful trials", key.1, f64::from_bits(key.2)))
            })?;
            Ok(CellSummary {
                scheme: key.0,
                m: key.1,
                sigma: f64::from_bits(key.2),
                trials: g.len(),
                failed: g.len() - ok.len(),
                clamped: stats.clamped,
                geo_mean_rre: stats.geo_mean,
                geo_std_error: stats.geo_std_error,
                mean_noise_factor: finite_mean(g.iter().map(|r| r.noise_factor)),
                mean_theorem_bound: finite_mean(g.iter().map(|r| r.theorem_bound)),
                mean_corollary_bound: finite_mean(g.iter().map(|r| r.corollary_bound)),
            })
        })
        .collect()
}

pub fn write_summary<W: Write>(mut w: W, cells: &[CellSummary]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for c in cells {
        writeln!(w, "{}", c.to_csv_row())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least squares of `log y` on `log m` over points with `m` in the closed
/// window.
pub fn fit_loglog_slope(points: &[(f64, f64)], window: (f64, f64)) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(m, y)| *m >= window.0 && *m <= window.1 && *m > 0.0 && *y > 0.0)
        .map(|(m, y)| (m.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!("{} points in window, need at least 2", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all points share one m".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, intercept: my - slope * mx, points: pts.len() })
}

/// `[4 m_t, m_max]` where `m_t` is the smallest `m` whose error falls below
/// half the error at the smallest `m`. Points must be sorted by `m`.
pub fn default_fit_window(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let y0 = points.first().ok_or_else(|| Error::InvalidArgument("no points".into()))?.1;
    let m_max = points.last().expect("nonempty").0;
    let mt = points
        .iter()
        .find(|(_, y)| *y < 0.5 * y0)
        .map(|p| p.0)
        .ok_or_else(|| Error::InvalidArgument("no phase transition in the data".into()))?;
    Ok((4.0 * mt, m_max))
}

/// `(m, geo_mean_rre)` points of one `(scheme, sigma)` curve, sorted by `m`.
pub fn curve(cells: &[CellSummary], scheme: Scheme, sigma: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.scheme == scheme && c.sigma == sigma)
        .map(|c| (c.m as f64, c.geo_mean_rre))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Optimized and uniform sweeps on common random numbers.
#[derive(Clone, Debug)]
pub struct SchemeComparison {
    pub optimized: Vec<ExperimentRecord>,
    pub uniform: Vec<ExperimentRecord>,
}

pub const PAIRED_HEADER: &str =
    "m,sigma,trial,seed,rre_optimized,rre_uniform,noise_factor_optimized,noise_factor_uniform,corollary_bound_optimized,corollary_bound_uniform";

impl SchemeComparison {
    pub fn write_paired<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{PAIRED_HEADER}")?;
        for (a, b) in self.optimized.iter().zip(&self.uniform) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                a.m,
                fmt_f(a.sigma),
                a.trial,
                a.seed,
                fmt_f(a.rre),
                fmt_f(b.rre),
                fmt_f(a.noise_factor),
                fmt_f(b.noise_factor),
                fmt_f(a.corollary_bound),
                fmt_f(b.corollary_bound),
            )?;
        }
        Ok(())
    }

    pub fn all_records(&self) -> Vec<ExperimentRecord> {
        self.optimized.iter().chain(&self.uniform).cloned().collect()
    }
}

pub fn compare_schemes(config: &ExperimentConfig) -> Result<SchemeComparison> {
    let exp = Experiment::new(config.clone())?;
    pool(config.threads)?.install(|| {
        Ok(SchemeComparison { optimized: exp.sweep(Scheme::Optimized), uniform: exp.sweep(Scheme::Uniform) })
    })
}
