//! Noisy subsampled measurements, the preconditioned objective, solvers,
//! empirical RIP checks and the closed-form error bounds.

mod bounds;
mod solvers;

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub use bounds::{
    deterministic_corollary_bound, optimized_theorem_bound, theorem_error_bound, variable_density_bound, Confidence,
    ModelMismatch,
};
pub use solvers::{
    dense_system, recover_generative, recover_oracle, recover_sparse_two_stage, rip_check, PreconditionedMap, RipReport,
    SparseSolverConfig, CALIBRATED_RIP_C, RIP_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::rng;
use crate::sampling::{gather, DrawnSample, SamplingPlan};
use crate::transforms::{Field, UnitaryOperator};

const VDSX_MAGIC: &[u8; 8] = b"VDSX\0\0\0\0";

/// Measurements `b = S F x0 + sigma g / sqrt(m)`, entries in draw order.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub b: Vec<Complex64>,
    pub sigma: f64,
    pub field: Field,
    pub omega: Vec<usize>,
    pub seed: u64,
}

/// Simulates measurements of a real signal. The noise is real Gaussian for
/// `Field::Real` (which needs a real-valued `f`) and has independent
/// standard-normal real and imaginary parts for `Field::Complex`.
pub fn simulate_measurements(
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    x0: &[f64],
    sigma: f64,
    field: Field,
    seed: u64,
) -> Result<MeasurementSet> {
    check_dims(f, plan, x0.len())?;
    if field == Field::Real && f.field() == Field::Complex {
        return Err(Error::InvalidArgument(format!("real measurements requested from complex operator {}", f.describe())));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {sigma} must be finite and nonnegative")));
    }
    let clean = gather(&f.forward_real(x0), plan, sample, false);
    let b = add_noise(&clean, sigma, field, seed);
    Ok(MeasurementSet { b, sigma, field, omega: sample.omega.clone(), seed })
}

/// `clean + sigma g / sqrt(m)` on the noise stream of `seed`.
pub fn add_noise(clean: &[Complex64], sigma: f64, field: Field, seed: u64) -> Vec<Complex64> {
    let mut r = rng::stream(seed, rng::streams::NOISE);
    let s = sigma / (clean.len() as f64).sqrt();
    clean
        .iter()
        .map(|&v| {
            let re: f64 = r.sample(StandardNormal);
            let im: f64 = if field == Field::Complex { r.sample(StandardNormal) } else { 0.0 };
            if sigma == 0.0 {
                v
            } else {
                v + Complex64::new(re, im) * s
            }
        })
        .collect()
}

fn check_dims(f: &UnitaryOperator, plan: &SamplingPlan, n: usize) -> Result<()> {
    if f.n() != plan.n() || n != f.n() {
        return Err(Error::Dimension(format!(
            "operator size {}, plan size {}, signal length {n}",
            f.n(),
            plan.n()
        )));
    }
    Ok(())
}

/// `||D~ S F x - D~ b||^2` with `D~ = Diag(d_{omega_i})`.
pub fn objective(plan: &SamplingPlan, sample: &DrawnSample, f: &UnitaryOperator, x: &[f64], b: &[Complex64]) -> f64 {
    let ax = gather(&f.forward_real(x), plan, sample, true);
    weighted_residual(&ax, plan, sample, b)
}

/// `||y - D~ b||^2` for `y` already equal to `S D F x`.
pub(crate) fn weighted_residual(y: &[Complex64], plan: &SamplingPlan, sample: &DrawnSample, b: &[Complex64]) -> f64 {
    y.iter()
        .zip(b)
        .zip(&sample.omega)
        .map(|((a, bi), &j)| (a - bi * plan.d()[j]).norm_sqr())
        .sum()
}

/// `D~ b` as a real vector (interleaved real/imaginary parts for complex
/// measurements).
pub fn preconditioned_rhs(plan: &SamplingPlan, sample: &DrawnSample, b: &[Complex64], field: Field) -> DVector<f64> {
    let scaled: Vec<Complex64> = b.iter().zip(&sample.omega).map(|(v, &j)| v * plan.d()[j]).collect();
    stack(&scaled, field)
}

/// `S D F B` for a real basis `B`, as a real matrix (`m x l` for the real
/// field, `2m x l` interleaved for the complex field).
pub fn system_matrix(
    f: &UnitaryOperator,
    plan: &SamplingPlan,
    sample: &DrawnSample,
    basis: &DMatrix<f64>,
    field: Field,
) -> DMatrix<f64> {
    let cols: Vec<Vec<Complex64>> = (0..basis.ncols())
        .map(|c| gather(&f.forward_real(basis.column(c).as_slice()), plan, sample, true))
        .collect();
    let rows = if field == Field::Complex { 2 * sample.m } else { sample.m };
    DMatrix::from_fn(rows, basis.ncols(), |r, c| match field {
        Field::Real => cols[c][r].re,
        Field::Complex => {
            let z = cols[c][r / 2];
            if r % 2 == 0 {
                z.re
            } else {
                z.im
            }
        }
    })
}

pub(crate) fn stack(v: &[Complex64], field: Field) -> DVector<f64> {
    match field {
        Field::Real => DVector::from_iterator(v.len(), v.iter().map(|z| z.re)),
        Field::Complex => crate::linalg::stack_complex_vec(v),
    }
}

pub(crate) fn unstack(r: &[f64], field: Field) -> Vec<Complex64> {
    match field {
        Field::Real => r.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        Field::Complex => r.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
    }
}

/// Outcome of a recovery run.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub objective: f64,
    /// Optimization gap: 0 for exact solvers; otherwise an upper bound or
    /// estimate, see `epsilon_certified`.
    pub epsilon: f64,
    pub epsilon_certified: bool,
    pub rre: Option<f64>,
    pub solver: String,
    pub iterations: usize,
    pub rank_deficient: bool,
    pub converged: bool,
    /// Index of the winning subspace for the oracle solver.
    pub subspace: Option<usize>,
    /// Selected support for the sparse solver.
    pub support: Option<Vec<usize>>,
}

impl RecoveryResult {
    /// Fills in `rre` against the ground truth.
    pub fn with_truth(mut self, x0: &[f64]) -> Result<Self> {
        self.rre = Some(relative_recovery_error(x0, &self.x_hat)?);
        Ok(self)
    }
}

/// `||x0 - x_hat|| / ||x0||`.
pub fn relative_recovery_error(x0: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x0.len() != x_hat.len() {
        return Err(Error::Dimension(format!("truth length {} vs estimate length {}", x0.len(), x_hat.len())));
    }
    let nrm = norm2(x0);
    if nrm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let diff: Vec<f64> = x0.iter().zip(x_hat).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / nrm)
}

/// Writes a signal as `VDSX`: 8-byte magic, `n` as little-endian `u64`,
/// then `n` little-endian `f64`.
pub fn write_vdsx<W: Write>(mut w: W, x: &[f64]) -> Result<()> {
    w.write_all(VDSX_MAGIC)?;
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    for v in x {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vdsx<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != VDSX_MAGIC {
        return Err(Error::Format("bad magic, expected VDSX".into()));
    }
    let mut nb = [0u8; 8];
    r.read_exact(&mut nb)?;
    let n = u64::from_le_bytes(nb) as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::draw_sample;

    #[test]
    fn noiseless_measurements_are_exact_and_seeded() {
        let f = UnitaryOperator::dft(8).unwrap();
        let plan = SamplingPlan::uniform(8).unwrap();
        let s = draw_sample(&plan, 5, 1).unwrap();
        let x0: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let m = simulate_measurements(&f, &plan, &s, &x0, 0.0, Field::Complex, 3).unwrap();
        let fx = f.forward_real(&x0);
        for (i, &j) in s.omega.iter().enumerate() {
            assert!((m.b[i] - fx[j] * s.scale).norm() < 1e-14);
        }
        assert_eq!(objective(&plan, &s, &f, &x0, &m.b), 0.0);
        let a = simulate_measurements(&f, &plan, &s, &x0, 0.7, Field::Complex, 3).unwrap();
        let b = simulate_measurements(&f, &plan, &s, &x0, 0.7, Field::Complex, 3).unwrap();
        assert_eq!(a, b);
        assert!(simulate_measurements(&f, &plan, &s, &x0, 0.7, Field::Real, 3).is_err());
    }

    #[test]
    fn noise_energy_matches_sigma() {
        let f = UnitaryOperator::identity(16).unwrap();
        let plan = SamplingPlan::uniform(16).unwrap();
        let s = draw_sample(&plan, 10_000, 2).unwrap();
        let x0 = vec![0.0; 16];
        let m = simulate_measurements(&f, &plan, &s, &x0, 1.0, Field::Real, 4).unwrap();
        let e: f64 = m.b.iter().map(|z| z.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 0.05, "{e}");
        let m = simulate_measurements(&f, &plan, &s, &x0, 1.0, Field::Complex, 4).unwrap();
        let e: f64 = m.b.iter().map(|z| z.norm_sqr()).sum();
        assert!((e - 2.0).abs() < 0.1, "{e}");
    }

    #[test]
    fn rre_examples() {
        assert_eq!(relative_recovery_error(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(relative_recovery_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((relative_recovery_error(&[3.0, 4.0], &[0.0, 4.0]).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(relative_recovery_error(&[0.0], &[1.0]), Err(Error::ZeroSignal)));
    }

    #[test]
    fn vdsx_round_trip() {
        let x = vec![1.5, -2.0, 1e-300];
        let mut buf = Vec::new();
        write_vdsx(&mut buf, &x).unwrap();
        assert_eq!(buf.len(), 16 + 24);
        assert_eq!(&buf[..4], b"VDSX");
        assert_eq!(read_vdsx(&buf[..]).unwrap(), x);
    }
}
