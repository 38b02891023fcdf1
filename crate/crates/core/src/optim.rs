//! First-order latent descent for `min_z ||A G(z) - y||^2` with a real
//! linear map `A` (complex measurements are handled by their real/imaginary
//! stacking).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::lstsq;
use crate::priors::GenerativeNetwork;
use crate::rng;

/// A real linear map together with its transpose.
pub trait RealLinearMap: Sync {
    fn input_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, r: &[f64]) -> Vec<f64>;
}

/// The identity on `R^n`; turns latent descent into projection onto the
/// range of the network.
pub struct IdentityMap(pub usize);

impl RealLinearMap for IdentityMap {
    fn input_len(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentDescentConfig {
    /// Total restarts, including any caller-supplied initial latents.
    pub restarts: usize,
    pub iterations: usize,
    /// Initial Adam step size.
    pub step: f64,
    /// Step multiplier applied after `patience` iterations without improvement.
    pub decay: f64,
    pub patience: usize,
    pub min_step: f64,
    /// Stop a restart once the objective drops to this value.
    pub tolerance: f64,
    /// Finish each restart with an exact least-squares solve on the linear
    /// piece selected by its activation pattern.
    pub polish: bool,
    pub seed: u64,
}

impl Default for LatentDescentConfig {
    fn default() -> Self {
        LatentDescentConfig {
            restarts: 10,
            iterations: 500,
            step: 1e-2,
            decay: 0.5,
            patience: 20,
            min_step: 1e-6,
            tolerance: 0.0,
            polish: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatentSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Iterations summed over restarts.
    pub iterations: usize,
    /// Index of the restart that produced `z`.
    pub restart: usize,
}

pub fn objective<M: RealLinearMap + ?Sized>(
    g: &GenerativeNetwork,
    map: &M,
    target: &[f64],
    z: &[f64],
) -> f64 {
    let r = map.apply(&g.forward(z));
    r.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Objective and its exact gradient `2 J(z)^T A^T (A G(z) - y)`.
pub fn objective_and_gradient<M: RealLinearMap + ?Sized>(
    g: &GenerativeNetwork,
    map: &M,
    target: &[f64],
    z: &[f64],
) -> (f64, Vec<f64>) {
    let mut r = map.apply(&g.forward(z));
    r.iter_mut().zip(target).for_each(|(a, b)| *a -= b);
    let f = r.iter().map(|v| v * v).sum();
    let back = map.apply_transpose(&r);
    let mut grad = g.vjp(z, &back);
    grad.iter_mut().for_each(|v| *v *= 2.0);
    (f, grad)
}

pub fn minimize_latent<M: RealLinearMap + ?Sized>(
    g: &GenerativeNetwork,
    map: &M,
    target: &[f64],
    config: &LatentDescentConfig,
    initial: &[Vec<f64>],
) -> LatentSolution {
    let k = g.latent_dim();
    let restarts = config.restarts.max(initial.len()).max(1);
    let mut best = LatentSolution { z: vec![0.0; k], objective: f64::INFINITY, iterations: 0, restart: 0 };
    let mut total_iters = 0;
    for restart in 0..restarts {
        let z0 = match initial.get(restart) {
            Some(z) => z.clone(),
            None => {
                let mut r = rng::stream(config.seed, 1000 + restart as u64);
                (0..k).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
            }
        };
        let (mut z, mut f, iters) = adam(g, map, target, config, z0);
        total_iters += iters;
        if config.polish {
            (z, f) = polish(g, map, target, z, f);
        }
        if f < best.objective {
            best = LatentSolution { z, objective: f, iterations: 0, restart };
        }
        if best.objective <= config.tolerance {
            break;
        }
    }
    best.iterations = total_iters;
    best
}

fn adam<M: RealLinearMap + ?Sized>(
    g: &GenerativeNetwork,
    map: &M,
    target: &[f64],
    config: &LatentDescentConfig,
    mut z: Vec<f64>,
) -> (Vec<f64>, f64, usize) {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-12;
    let k = z.len();
    let mut lr = config.step;
    let mut m1 = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let mut t = 0i32;
    let mut best_z = z.clone();
    let mut best_f = f64::INFINITY;
    let mut stale = 0;
    let mut iters = 0;
    for _ in 0..config.iterations {
        iters += 1;
        let (f, grad) = objective_and_gradient(g, map, target, &z);
        if f < best_f * (1.0 - 1e-9) {
            best_f = f;
            best_z.clone_from(&z);
            stale = 0;
        } else {
            stale += 1;
        }
        if best_f <= config.tolerance {
            break;
        }
        if stale >= config.patience {
            lr *= config.decay;
            if lr < config.min_step {
                break;
            }
            z.clone_from(&best_z);
            m1.iter_mut().for_each(|v| *v = 0.0);
            m2.iter_mut().for_each(|v| *v = 0.0);
            t = 0;
            stale = 0;
            continue;
        }
        t += 1;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for i in 0..k {
            m1[i] = BETA1 * m1[i] + (1.0 - BETA1) * grad[i];
            m2[i] = BETA2 * m2[i] + (1.0 - BETA2) * grad[i] * grad[i];
            z[i] -= lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + EPS);
        }
    }
    let f = objective(g, map, target, &z);
    if f < best_f {
        best_f = f;
        best_z = z;
    }
    (best_z, best_f, iters)
}

/// Active-set refinement: solve the least-squares problem on the current
/// linear piece and keep the result when the true objective improves.
fn polish<M: RealLinearMap + ?Sized>(
    g: &GenerativeNetwork,
    map: &M,
    target: &[f64],
    mut z: Vec<f64>,
    mut f: f64,
) -> (Vec<f64>, f64) {
    let y = DVector::from_column_slice(target);
    for _ in 0..8 {
        let piece = g.linear_piece(&g.pattern(&z));
        let k = piece.ncols();
        let cols: Vec<Vec<f64>> = (0..k).map(|c| map.apply(piece.column(c).as_slice())).collect();
        let a = DMatrix::from_fn(target.len(), k, |r, c| cols[c][r]);
        let cand = lstsq(&a, &y).x.as_slice().to_vec();
        let fc = objective(g, map, target, &cand);
        if fc < f {
            let same_piece = g.pattern(&cand) == g.pattern(&z);
            z = cand;
            f = fc;
            if same_piece {
                break;
            }
        } else {
            break;
        }
    }
    (z, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = GenerativeNetwork::random(&[3, 8, 12], &mut rng).unwrap();
        let target: Vec<f64> = (0..12).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.3).collect();
        let map = IdentityMap(12);
        let mut checked = 0;
        for _ in 0..20 {
            let z: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let h = 1e-5;
            // Skip points within a step of a kink: the pattern must be constant
            // across the stencil.
            let p0 = g.pattern(&z);
            let stable = (0..3).all(|i| {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                g.pattern(&zp) == p0 && g.pattern(&zm) == p0
            });
            if !stable {
                continue;
            }
            let (_, grad) = objective_and_gradient(&g, &map, &target, &z);
            for i in 0..3 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fd = (objective(&g, &map, &target, &zp) - objective(&g, &map, &target, &zm)) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-8);
                assert!(rel <= 1e-5, "component {i}: fd {fd} vs {}", grad[i]);
            }
            checked += 1;
        }
        assert!(checked >= 10);
    }

    #[test]
    fn projection_of_range_point_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = GenerativeNetwork::random(&[2, 10, 16], &mut rng).unwrap();
        let z0 = vec![0.7, -0.4];
        let x0 = g.forward(&z0);
        let sol = minimize_latent(&g, &IdentityMap(16), &x0, &LatentDescentConfig::default(), &[]);
        assert!(sol.objective < 1e-16, "objective {}", sol.objective);
    }
}
