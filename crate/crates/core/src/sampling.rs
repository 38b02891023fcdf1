//! With-replacement sampling plans, preconditioners, unit truncation and
//! the noise factor.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::coherence::CoherenceVector;
use crate::error::{Error, Result};
use crate::rng;
use crate::transforms::UnitaryOperator;

/// Tolerance on `sum p = 1` accepted for caller-supplied probabilities.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;
/// Squared-norm slack used to locate the unit-truncation index.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Row probabilities `p` and preconditioner `d_i = (n p_i)^{-1/2}`
/// (`d_i = 0` on rows with `p_i = 0`, which are never drawn).
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    p: Vec<f64>,
    d: Vec<f64>,
    cumulative: Vec<f64>,
    alpha_ref: Option<CoherenceVector>,
}

impl SamplingPlan {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("empty plan".into()));
        }
        Self::build(vec![1.0 / n as f64; n], None)
    }

    /// Arbitrary probabilities; nonnegative, summing to one within
    /// `PROBABILITY_SUM_TOL` (renormalized exactly).
    pub fn from_probabilities(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Dimension("empty plan".into()));
        }
        if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!("p[{i}] = {} is not a probability", p[i])));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidArgument(format!("probabilities sum to {sum}")));
        }
        Self::build(p.iter().map(|v| v / sum).collect(), None)
    }

    /// `p'_i = alpha_i^2 / ||alpha||^2`, so `d_i = ||alpha|| / (sqrt(n) alpha_i)`.
    pub fn optimized(alpha: &CoherenceVector) -> Result<Self> {
        let norm_sq: f64 = alpha.alpha.iter().map(|a| a * a).sum();
        if norm_sq == 0.0 {
            return Err(Error::ZeroCoherence);
        }
        let p = alpha.alpha.iter().map(|a| a * a / norm_sq).collect();
        Self::build(p, Some(alpha.clone()))
    }

    /// Attaches the coherence vector a plan is meant to be used with.
    pub fn with_alpha(mut self, alpha: CoherenceVector) -> Result<Self> {
        if alpha.len() != self.n() {
            return Err(Error::Dimension(format!("alpha of length {} for plan of size {}", alpha.len(), self.n())));
        }
        self.alpha_ref = Some(alpha);
        Ok(self)
    }

    fn build(p: Vec<f64>, alpha_ref: Option<CoherenceVector>) -> Result<Self> {
        let n = p.len() as f64;
        let d = p.iter().map(|&pi| if pi > 0.0 { 1.0 / (n * pi).sqrt() } else { 0.0 }).collect();
        let mut cumulative = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        for &pi in &p {
            acc += pi;
            cumulative.push(acc);
        }
        let last = p.iter().rposition(|&pi| pi > 0.0).ok_or(Error::ZeroCoherence)?;
        for c in cumulative[last..].iter_mut() {
            *c = 1.0;
        }
        Ok(SamplingPlan { p, d, cumulative, alpha_ref })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn alpha_ref(&self) -> Option<&CoherenceVector> {
        self.alpha_ref.as_ref()
    }

    pub fn max_d(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }

    /// Row index for a uniform variate `u` in `[0, 1)`.
    pub fn index_for(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.p.len() - 1)
    }

    /// CSV `index,p,d` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,p,d")?;
        for i in 0..self.n() {
            writeln!(w, "{i},{:.16e},{:.16e}", self.p[i], self.d[i])?;
        }
        Ok(())
    }

    /// Reads `index,p,d` back; `d` is recomputed from `p` and checked.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let rows = read_rows(r, "index,p,d", 3)?;
        let mut p = Vec::with_capacity(rows.len());
        let mut d = Vec::with_capacity(rows.len());
        for (i, f) in rows.iter().enumerate() {
            check_index(&f[0], i)?;
            p.push(parse_f64(&f[1])?);
            d.push(parse_f64(&f[2])?);
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::Format(format!("probabilities sum to {sum}")));
        }
        let plan = Self::build(p, None)?;
        for (i, (a, b)) in plan.d.iter().zip(&d).enumerate() {
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(Error::Format(format!("d[{i}] = {b} inconsistent with p")));
            }
        }
        Ok(SamplingPlan { d, ..plan })
    }
}

/// `mu(alpha, p) = max_j alpha_j / sqrt(p_j)` over rows with `alpha_j > 0`.
pub fn complexity_mu(alpha: &[f64], p: &[f64]) -> Result<f64> {
    if alpha.len() != p.len() {
        return Err(Error::Dimension(format!("alpha has {} entries, p has {}", alpha.len(), p.len())));
    }
    let mut mu = 0.0f64;
    for (j, (&a, &pj)) in alpha.iter().zip(p).enumerate() {
        if a > 0.0 {
            if pj <= 0.0 {
                return Err(Error::InfiniteComplexity { index: j });
            }
            mu = mu.max(a / pj.sqrt());
        }
    }
    Ok(mu)
}

/// `m` rows drawn with replacement. Measurement row `i` is
/// `sqrt(n/m) e_{omega_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawnSample {
    pub omega: Vec<usize>,
    pub m: usize,
    /// Draw positions sorted so that `d_{omega}` is non-increasing (stable).
    pub order: Vec<usize>,
    pub scale: f64,
}

impl DrawnSample {
    /// Builds a sample from explicit indices, computing the order from `plan`.
    pub fn from_indices(plan: &SamplingPlan, omega: Vec<usize>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidArgument("a sample needs at least one row".into()));
        }
        let n = plan.n();
        if let Some(&j) = omega.iter().find(|&&j| j >= n) {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        if let Some(&j) = omega.iter().find(|&&j| plan.p[j] == 0.0) {
            return Err(Error::InvalidArgument(format!("row {j} has zero probability")));
        }
        let m = omega.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| plan.d[omega[b]].total_cmp(&plan.d[omega[a]]));
        Ok(DrawnSample { omega, m, order, scale: (n as f64 / m as f64).sqrt() })
    }

    /// Row indices in sorted (non-increasing `d`) order.
    pub fn sorted_omega(&self) -> Vec<usize> {
        self.order.iter().map(|&i| self.omega[i]).collect()
    }

    /// `(S d)` in sorted order, without the `sqrt(n/m)` factor: the diagonal
    /// of the row preconditioner.
    pub fn sorted_d(&self, plan: &SamplingPlan) -> Vec<f64> {
        self.order.iter().map(|&i| plan.d[self.omega[i]]).collect()
    }

    /// `||S d||^2 = (n/m) sum_i d_{omega_i}^2`.
    pub fn sd_mass(&self, plan: &SamplingPlan) -> f64 {
        self.scale * self.scale * self.omega.iter().map(|&j| plan.d[j] * plan.d[j]).sum::<f64>()
    }

    /// CSV `position,omega`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "position,omega")?;
        for (i, j) in self.omega.iter().enumerate() {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, plan: &SamplingPlan) -> Result<Self> {
        let rows = read_rows(r, "position,omega", 2)?;
        let mut omega = Vec::with_capacity(rows.len());
        for (i, f) in rows.iter().enumerate() {
            check_index(&f[0], i)?;
            omega.push(f[1].parse().map_err(|_| Error::Format(format!("bad row index {:?}", f[1])))?);
        }
        Self::from_indices(plan, omega)
    }
}

/// Draws `m` i.i.d. rows from `plan` by inverse CDF on the sampling stream
/// of `seed`.
pub fn draw_sample(plan: &SamplingPlan, m: usize, seed: u64) -> Result<DrawnSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let mut r = rng::stream(seed, rng::streams::SAMPLE);
    let omega = (0..m).map(|_| plan.index_for(r.random::<f64>())).collect();
    DrawnSample::from_indices(plan, omega)
}

/// Unit truncation of a nonnegative vector; returns the truncated vector
/// and the 1-based cut index `I`.
pub fn unit_truncation(v: &[f64]) -> Result<(Vec<f64>, usize)> {
    if let Some(i) = v.iter().position(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument(format!("entry {i} = {} is negative", v[i])));
    }
    let total: f64 = v.iter().map(|x| x * x).sum();
    if total < 1.0 - TRUNCATION_TOL {
        return Err(Error::TruncationUndefined { norm: total.sqrt() });
    }
    let mut out = vec![0.0; v.len()];
    let mut acc = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let next = acc + x * x;
        if next >= 1.0 - TRUNCATION_TOL || i + 1 == v.len() {
            out[i] = (1.0 - acc).max(0.0).sqrt();
            return Ok((out, i + 1));
        }
        out[i] = x;
        acc = next;
    }
    unreachable!("nonempty input with norm at least one")
}

/// `||Diag(w) T(v)||` for weights `w` and a truncatable `v`.
pub fn weighted_truncation_norm(w: &[f64], v: &[f64]) -> Result<f64> {
    if w.len() != v.len() {
        return Err(Error::Dimension(format!("{} weights for {} entries", w.len(), v.len())));
    }
    let (t, _) = unit_truncation(v)?;
    Ok(w.iter().zip(&t).map(|(a, b)| a * a * b * b).sum::<f64>().sqrt())
}

/// `S D alpha` in sorted order: `sqrt(n/m) d_{omega_i} alpha_{omega_i}`.
pub fn sorted_sd_alpha(plan: &SamplingPlan, sample: &DrawnSample, alpha: &[f64]) -> Vec<f64> {
    sample
        .sorted_omega()
        .iter()
        .map(|&j| sample.scale * plan.d[j] * alpha[j])
        .collect()
}

fn check_alpha(plan: &SamplingPlan, alpha: &CoherenceVector) -> Result<()> {
    if alpha.len() != plan.n() {
        return Err(Error::Dimension(format!("alpha of length {} for plan of size {}", alpha.len(), plan.n())));
    }
    Ok(())
}

/// Noise factor `||D~ T(S D alpha)||` with rows sorted by non-increasing
/// `d_{omega_i}` and `D~ = Diag(d_{omega_i})`.
pub fn noise_factor(plan: &SamplingPlan, sample: &DrawnSample, alpha: &CoherenceVector) -> Result<f64> {
    check_alpha(plan, alpha)?;
    weighted_truncation_norm(&sample.sorted_d(plan), &sorted_sd_alpha(plan, sample, &alpha.alpha))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseFactorBounds {
    pub noise_factor: f64,
    /// 1-based cut index of the unit truncation.
    pub truncation_index: usize,
    /// `max_i d_{omega_i}` over the drawn rows.
    pub max_sd: f64,
    pub max_d: f64,
    /// `||(S D^2 alpha)|_[I]||`.
    pub truncated_sd2alpha_norm: f64,
    /// `||alpha|| / (sqrt(n) min alpha)`, the deterministic cap for optimized plans.
    pub optimized_cap: f64,
    /// `||alpha|| min(1/sqrt(t), 1/(sqrt(n) min alpha))`.
    pub optimized_closed_bound: f64,
}

pub fn noise_factor_bounds(
    plan: &SamplingPlan,
    sample: &DrawnSample,
    alpha: &CoherenceVector,
    t: f64,
) -> Result<NoiseFactorBounds> {
    check_alpha(plan, alpha)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("tail parameter t = {t} must be positive")));
    }
    let dsorted = sample.sorted_d(plan);
    let v = sorted_sd_alpha(plan, sample, &alpha.alpha);
    let (trunc, cut) = unit_truncation(&v)?;
    let nf = dsorted.iter().zip(&trunc).map(|(a, b)| a * a * b * b).sum::<f64>().sqrt();
    let truncated = dsorted[..cut].iter().zip(&v[..cut]).map(|(d, x)| (d * x) * (d * x)).sum::<f64>().sqrt();
    let norm = alpha.norm();
    let min_alpha = alpha.min_positive().ok_or(Error::ZeroCoherence)?;
    let cap = norm / ((plan.n() as f64).sqrt() * min_alpha);
    Ok(NoiseFactorBounds {
        noise_factor: nf,
        truncation_index: cut,
        max_sd: dsorted.iter().cloned().fold(0.0, f64::max),
        max_d: plan.max_d(),
        truncated_sd2alpha_norm: truncated,
        optimized_cap: cap,
        optimized_closed_bound: (norm / t.sqrt()).min(cap),
    })
}

/// `ceil(C mu^2 (ln l + log M + ln(1/delta)))`, at least one.
pub fn sample_complexity(mu: f64, ell: usize, log_m: f64, delta: f64, c: f64) -> Result<usize> {
    if !(mu > 0.0) || ell == 0 || !(log_m >= 0.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample complexity needs mu > 0, l >= 1, log M >= 0, C > 0 (got {mu}, {ell}, {log_m}, {c})"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0, 1]")));
    }
    let m = (c * mu * mu * ((ell as f64).ln() + log_m + (1.0 / delta).ln())).ceil();
    Ok((m as usize).max(1))
}

/// `S F x` (or `S D F x` when `preconditioned`), entries in draw order.
pub fn apply_measurement(
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    x: &[Complex64],
    preconditioned: bool,
) -> Vec<Complex64> {
    let fx = f.forward(x);
    gather(&fx, plan, sample, preconditioned)
}

pub fn apply_measurement_real(
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    x: &[f64],
    preconditioned: bool,
) -> Vec<Complex64> {
    let fx = f.forward_real(x);
    gather(&fx, plan, sample, preconditioned)
}

/// Gathers drawn rows of a transformed vector.
pub fn gather(fx: &[Complex64], plan: &SamplingPlan, sample: &DrawnSample, preconditioned: bool) -> Vec<Complex64> {
    sample
        .omega
        .iter()
        .map(|&j| {
            let w = if preconditioned { sample.scale * plan.d[j] } else { sample.scale };
            fx[j] * w
        })
        .collect()
}

/// Adjoint of `gather`: scatters `y` back to length `n`.
pub fn scatter(y: &[Complex64], plan: &SamplingPlan, sample: &DrawnSample, preconditioned: bool) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); plan.n()];
    for (&j, v) in sample.omega.iter().zip(y) {
        let w = if preconditioned { sample.scale * plan.d[j] } else { sample.scale };
        out[j] += v * w;
    }
    out
}

/// Dense `S D F` (`m x n`), rows in draw order.
pub fn dense_sdf(f: &UnitaryOperator, plan: &SamplingPlan, sample: &DrawnSample) -> DMatrix<Complex64> {
    let rows: Vec<Vec<Complex64>> = sample
        .omega
        .iter()
        .map(|&j| f.row_vector(j).expect("row in range"))
        .collect();
    DMatrix::from_fn(sample.m, f.n(), |i, c| rows[i][c].conj() * (sample.scale * plan.d[sample.omega[i]]))
}

fn read_rows<R: BufRead>(r: R, header: &str, fields: usize) -> Result<Vec<Vec<String>>> {
    let mut lines = r.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != header {
        return Err(Error::Format(format!("expected header {header:?}, found {first:?}")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<String> = line.trim().split(',').map(str::to_string).collect();
        if f.len() != fields {
            return Err(Error::Format(format!("expected {fields} fields in {line:?}")));
        }
        rows.push(f);
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(rows)
}

fn check_index(s: &str, expect: usize) -> Result<()> {
    match s.parse::<usize>() {
        Ok(i) if i == expect => Ok(()),
        _ => Err(Error::Format(format!("index {s:?} out of sequence, expected {expect}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("bad number {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::CoherenceMethod;

    fn alpha(v: &[f64]) -> CoherenceVector {
        CoherenceVector::new(v.to_vec(), CoherenceMethod::Exact, "test").unwrap()
    }

    #[test]
    fn optimized_examples() {
        let plan = SamplingPlan::optimized(&alpha(&[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(plan.p(), &[0.25; 4]);
        assert_eq!(plan.d(), &[1.0; 4]);

        let plan = SamplingPlan::optimized(&alpha(&[2.0, 1.0, 1.0])).unwrap();
        let expect = [4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in plan.p().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let plan = SamplingPlan::optimized(&alpha(&[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(plan.p(), &[0.5, 0.0, 0.5]);
        assert_eq!(plan.d()[1], 0.0);
        assert!(matches!(SamplingPlan::optimized(&alpha(&[0.0, 0.0])), Err(Error::ZeroCoherence)));
    }

    #[test]
    fn mu_examples() {
        assert!((complexity_mu(&[1.0, 1.0], &[0.5, 0.5]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let third = 1.0 / 3.0;
        let mu = complexity_mu(&[2.0, 1.0, 1.0], &[third; 3]).unwrap();
        assert!((mu - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        assert!(matches!(complexity_mu(&[1.0, 1.0], &[1.0, 0.0]), Err(Error::InfiniteComplexity { index: 1 })));
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(unit_truncation(&[1.0, 0.5, 0.2]).unwrap(), (vec![1.0, 0.0, 0.0], 1));
        assert_eq!(unit_truncation(&[2.0, 2.0]).unwrap(), (vec![1.0, 0.0], 1));
        let (t, i) = unit_truncation(&[0.6, 0.6, 0.6]).unwrap();
        assert_eq!(i, 3);
        assert_eq!(&t[..2], &[0.6, 0.6]);
        assert!((t[2] - 0.28f64.sqrt()).abs() < 1e-15);
        assert!(matches!(unit_truncation(&[0.5, 0.5]), Err(Error::TruncationUndefined { .. })));
    }

    #[test]
    fn degenerate_single_row_draw() {
        let plan = SamplingPlan::from_probabilities(vec![0.0, 1.0, 0.0]).unwrap();
        let s = draw_sample(&plan, 5, 1).unwrap();
        assert_eq!(s.omega, vec![1; 5]);
    }

    #[test]
    fn draw_is_deterministic_and_sorted() {
        let plan = SamplingPlan::optimized(&alpha(&[3.0, 1.0, 0.5, 2.0, 0.0])).unwrap();
        let a = draw_sample(&plan, 200, 42).unwrap();
        assert_eq!(a, draw_sample(&plan, 200, 42).unwrap());
        let d = a.sorted_d(&plan);
        assert!(d.windows(2).all(|w| w[0] >= w[1]));
        assert!(a.omega.iter().all(|&j| j != 4));
    }

    #[test]
    fn gather_repeats_rows() {
        let f = UnitaryOperator::identity(2).unwrap();
        let plan = SamplingPlan::uniform(2).unwrap();
        let s = DrawnSample::from_indices(&plan, vec![1, 1]).unwrap();
        let y = apply_measurement_real(&f, &plan, &s, &[3.0, 5.0], false);
        assert_eq!(y, vec![Complex64::new(5.0, 0.0); 2]);
    }

    #[test]
    fn sample_complexity_examples() {
        assert_eq!(sample_complexity(1.0, 1, 0.0, 1.0, 1.0).unwrap(), 1);
        let a = sample_complexity(1.0, 5, 20f64.ln(), 0.1, 1.0).unwrap();
        let b = sample_complexity(2.0, 5, 20f64.ln(), 0.1, 1.0).unwrap();
        assert!((b as f64 / a as f64 - 4.0).abs() < 0.5);
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let plan = SamplingPlan::optimized(&alpha(&[0.3, 1.0 / 7.0, 0.0, 2.5])).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let back = SamplingPlan::read_csv(&buf[..]).unwrap();
        assert_eq!(back.p(), plan.p());
        assert_eq!(back.d(), plan.d());

        let s = draw_sample(&plan, 9, 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(DrawnSample::read_csv(&buf[..], &plan).unwrap(), s);
    }
}
