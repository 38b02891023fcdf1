//! Bias-free ReLU generative networks `G(z) = W_d relu(... relu(W_1 z))`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VDSG";
const VERSION: u32 = 1;

/// Which hidden units are active (strictly positive pre-activation), one
/// mask per hidden layer.
pub type ActivationPattern = Vec<Vec<bool>>;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeNetwork {
    widths: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
}

impl GenerativeNetwork {
    /// Builds a network from its layer matrices; `weights[i]` maps layer `i`
    /// to layer `i + 1`.
    pub fn new(weights: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::Dimension("network needs at least one layer".into()))?;
        let mut widths = vec![first.ncols()];
        for (i, w) in weights.iter().enumerate() {
            if w.ncols() != *widths.last().unwrap() {
                return Err(Error::Dimension(format!(
                    "layer {} expects input width {}, previous layer has {}",
                    i + 1,
                    w.ncols(),
                    widths.last().unwrap()
                )));
            }
            if w.nrows() == 0 {
                return Err(Error::Dimension(format!("layer {} has zero width", i + 1)));
            }
            widths.push(w.nrows());
        }
        if widths[0] == 0 {
            return Err(Error::Dimension("latent dimension must be positive".into()));
        }
        Ok(GenerativeNetwork { widths, weights })
    }

    /// Random Gaussian weights: He scaling on hidden layers and a final
    /// layer scaled so that `E ||G(z)||^2 ~ 1` for `z ~ N(0, I_k)`.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Dimension("need at least latent and output widths".into()));
        }
        let depth = widths.len() - 1;
        let k = widths[0] as f64;
        let mut weights = Vec::with_capacity(depth);
        for i in 0..depth {
            let (rows, cols) = (widths[i + 1], widths[i]);
            let var = if i + 1 < depth { 2.0 / cols as f64 } else { 1.0 / (rows as f64 * k) };
            let dist = Normal::new(0.0, var.sqrt()).expect("positive variance");
            weights.push(DMatrix::from_fn(rows, cols, |_, _| dist.sample(rng)));
        }
        Self::new(weights)
    }

    /// Layer widths `k = k_0, k_1, ..., k_d = n`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn latent_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of layers `d`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        self.forward_with_pattern(z).0
    }

    pub fn forward_with_pattern(&self, z: &[f64]) -> (Vec<f64>, ActivationPattern) {
        assert_eq!(z.len(), self.latent_dim(), "latent dimension mismatch");
        let mut h = DVector::from_column_slice(z);
        let mut pattern = Vec::with_capacity(self.depth().saturating_sub(1));
        for (i, w) in self.weights.iter().enumerate() {
            h = w * h;
            if i + 1 < self.depth() {
                let mask: Vec<bool> = h.iter().map(|&v| v > 0.0).collect();
                h.iter_mut().zip(&mask).for_each(|(v, &on)| {
                    if !on {
                        *v = 0.0
                    }
                });
                pattern.push(mask);
            }
        }
        (h.as_slice().to_vec(), pattern)
    }

    pub fn pattern(&self, z: &[f64]) -> ActivationPattern {
        self.forward_with_pattern(z).1
    }

    /// The linear piece `W_d L_{d-1} W_{d-1} ... L_1 W_1` selected by an
    /// activation pattern (`L_i` the diagonal 0/1 masks); `n x k`.
    pub fn linear_piece(&self, pattern: &ActivationPattern) -> DMatrix<f64> {
        let mut acc = self.weights[0].clone();
        for (i, mask) in pattern.iter().enumerate() {
            for (r, &on) in mask.iter().enumerate() {
                if !on {
                    acc.row_mut(r).fill(0.0);
                }
            }
            acc = &self.weights[i + 1] * acc;
        }
        acc
    }

    /// `J(z)^T v` by reverse-mode differentiation.
    pub fn vjp(&self, z: &[f64], v: &[f64]) -> Vec<f64> {
        let pattern = self.pattern(z);
        let mut g = DVector::from_column_slice(v);
        for i in (0..self.depth()).rev() {
            if i < pattern.len() {
                g.iter_mut().zip(&pattern[i]).for_each(|(x, &on)| {
                    if !on {
                        *x = 0.0
                    }
                });
            }
            g = self.weights[i].tr_mul(&g);
        }
        g.as_slice().to_vec()
    }

    /// Writes the `VDSG` binary format: magic, version `u32`, depth `u32`,
    /// `depth + 1` widths as `u32`, then each layer's weights as row-major
    /// little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.depth() as u32).to_le_bytes())?;
        for &k in &self.widths {
            w.write_all(&(k as u32).to_le_bytes())?;
        }
        for layer in &self.weights {
            for r in 0..layer.nrows() {
                for c in 0..layer.ncols() {
                    w.write_all(&layer[(r, c)].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected VDSG".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported VDSG version {version}")));
        }
        let depth = read_u32(&mut r)? as usize;
        if depth == 0 || depth > 1024 {
            return Err(Error::Format(format!("implausible depth {depth}")));
        }
        let widths = (0..=depth)
            .map(|_| read_u32(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut weights = Vec::with_capacity(depth);
        for i in 0..depth {
            let (rows, cols) = (widths[i + 1], widths[i]);
            let mut data = vec![0.0; rows * cols];
            let mut buf = [0u8; 8];
            for v in data.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            weights.push(DMatrix::from_row_slice(rows, cols, &data));
        }
        Self::new(weights)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
