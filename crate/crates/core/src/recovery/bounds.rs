use crate::coherence::CoherenceVector;
use crate::error::{Error, Result};
use crate::sampling::{noise_factor, DrawnSample, SamplingPlan};

/// Confidence level, either as a failure probability `delta` or directly as
/// the tail parameter `t` (success probability `1 - 2 exp(-t^2)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Confidence {
    Delta(f64),
    T(f64),
}

impl Confidence {
    /// `t` with `2 exp(-t^2) = delta`.
    pub fn t(self) -> Result<f64> {
        match self {
            Confidence::T(t) if t >= 0.0 => Ok(t),
            Confidence::Delta(d) if d > 0.0 && d < 2.0 => Ok((2.0 / d).ln().sqrt()),
            other => Err(Error::InvalidArgument(format!("invalid confidence {other:?}"))),
        }
    }
}

/// Model-mismatch terms `||x_perp||` and `||S D F x_perp||`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModelMismatch {
    pub x_perp_norm: f64,
    pub sdf_x_perp_norm: f64,
}

impl ModelMismatch {
    fn total(&self, epsilon: f64) -> f64 {
        self.x_perp_norm + 6.0 * self.sdf_x_perp_norm + 1.5 * epsilon.max(0.0).sqrt()
    }
}

fn check_inputs(sigma: f64, ell: usize, log_m: f64, epsilon: f64) -> Result<()> {
    if !(sigma >= 0.0) || ell == 0 || !(log_m >= 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bound needs sigma >= 0, l >= 1, log M >= 0, epsilon >= 0 (got {sigma}, {ell}, {log_m}, {epsilon})"
        )));
    }
    Ok(())
}

/// `9 sigma / sqrt(m) * nf * (sqrt(l) + sqrt(log M) + t) + ||x_perp||
/// + 6 ||S D F x_perp|| + 1.5 sqrt(epsilon)`, with `nf` the noise factor of
/// the draw.
#[allow(clippy::too_many_arguments)]
pub fn theorem_error_bound(
    plan: &SamplingPlan,
    sample: &DrawnSample,
    alpha: &CoherenceVector,
    sigma: f64,
    ell: usize,
    log_m: f64,
    confidence: Confidence,
    epsilon: f64,
    mismatch: ModelMismatch,
) -> Result<f64> {
    check_inputs(sigma, ell, log_m, epsilon)?;
    let t = confidence.t()?;
    let nf = noise_factor(plan, sample, alpha)?;
    let m = sample.m as f64;
    Ok(9.0 * sigma / m.sqrt() * nf * ((ell as f64).sqrt() + log_m.sqrt() + t) + mismatch.total(epsilon))
}

/// The optimized-sampling form with the closed-form noise factor:
/// `9 sigma / sqrt(m) ||alpha|| min(sqrt(5/(4 delta)), 1/(sqrt(n) min alpha))
/// (sqrt(l) + sqrt(log M) + sqrt(log(20/delta)))` plus the mismatch terms.
#[allow(clippy::too_many_arguments)]
pub fn optimized_theorem_bound(
    alpha: &CoherenceVector,
    m: usize,
    sigma: f64,
    ell: usize,
    log_m: f64,
    delta: f64,
    epsilon: f64,
    mismatch: ModelMismatch,
) -> Result<f64> {
    check_inputs(sigma, ell, log_m, epsilon)?;
    if !(delta > 0.0 && delta < 1.0) || m == 0 {
        return Err(Error::InvalidArgument(format!("need delta in (0, 1) and m >= 1 (got {delta}, {m})")));
    }
    let n = alpha.len() as f64;
    let min_alpha = alpha.min_positive().ok_or(Error::ZeroCoherence)?;
    let factor = alpha.norm() * (5.0 / (4.0 * delta)).sqrt().min(1.0 / (n.sqrt() * min_alpha));
    let tail = (ell as f64).sqrt() + log_m.sqrt() + (20.0 / delta).ln().sqrt();
    Ok(9.0 * sigma / (m as f64).sqrt() * factor * tail + mismatch.total(epsilon))
}

/// Variable-density form: `9 sigma / sqrt(m) * nf * (sqrt(l) +
/// sqrt(2 log M) + sqrt(log(4/delta)))` plus the mismatch terms.
#[allow(clippy::too_many_arguments)]
pub fn variable_density_bound(
    plan: &SamplingPlan,
    sample: &DrawnSample,
    alpha: &CoherenceVector,
    sigma: f64,
    ell: usize,
    log_m: f64,
    delta: f64,
    epsilon: f64,
    mismatch: ModelMismatch,
) -> Result<f64> {
    check_inputs(sigma, ell, log_m, epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0, 1)")));
    }
    let nf = noise_factor(plan, sample, alpha)?;
    let tail = (ell as f64).sqrt() + (2.0 * log_m).sqrt() + (4.0 / delta).ln().sqrt();
    Ok(9.0 * sigma / (sample.m as f64).sqrt() * nf * tail + mismatch.total(epsilon))
}

/// Noise term obtained by treating Gaussian noise as deterministic:
/// `sigma / sqrt(m) * ||alpha|| * sum_i 1/(sqrt(n) alpha_{omega_i})`.
pub fn deterministic_corollary_bound(sample: &DrawnSample, alpha: &CoherenceVector, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be nonnegative")));
    }
    let sqrt_n = (alpha.len() as f64).sqrt();
    let mut sum = 0.0;
    for &j in &sample.omega {
        let a = *alpha.alpha.get(j).ok_or(Error::IndexOutOfRange { index: j, len: alpha.len() })?;
        if a <= 0.0 {
            return Err(Error::InfiniteComplexity { index: j });
        }
        sum += 1.0 / (sqrt_n * a);
    }
    Ok(sigma / (sample.m as f64).sqrt() * alpha.norm() * sum)
}
