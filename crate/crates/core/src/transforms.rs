//! Unitary measurement and sparsity bases.
//!
//! Every operator acts on complex vectors of length `n`. Real operators
//! (Haar, identity, real dense matrices) act componentwise on the real and
//! imaginary parts, so a single representation covers both fields.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Tolerance used when validating dense operators.
pub const DENSE_UNITARY_TOL: f64 = 1e-8;

/// Scalar field of an operator or measurement pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(Error::InvalidArgument(format!("unknown field `{other}`"))),
        }
    }
}

#[derive(Clone)]
struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}

#[derive(Clone)]
enum Kind {
    Identity,
    Dft1d(FftPair),
    Dft2d { side: usize, fft: FftPair },
    Haar1d { levels: usize },
    Haar2d { side: usize, levels: usize },
    Dense { matrix: Arc<DMatrix<Complex64>> },
    Composed { measurement: Arc<UnitaryOperator>, sparsity: Arc<UnitaryOperator> },
    BlockDiagonal { blocks: Vec<UnitaryOperator> },
}

/// An `n x n` unitary transform with fast forward and adjoint application.
///
/// Operators are immutable; `forward` and `adjoint` allocate their own
/// scratch and may be called concurrently.
#[derive(Clone)]
pub struct UnitaryOperator {
    n: usize,
    field: Field,
    kind: Kind,
}

impl fmt::Debug for UnitaryOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryOperator")
            .field("n", &self.n)
            .field("field", &self.field)
            .field("kind", &self.describe())
            .finish()
    }
}

fn check_power_of_two(n: usize, what: &str) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "{what} must be a power of two >= 2, got {n}"
        )));
    }
    Ok(())
}

impl UnitaryOperator {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("identity of dimension 0".into()));
        }
        Ok(UnitaryOperator { n, field: Field::Real, kind: Kind::Identity })
    }

    /// Unitary DFT of length `n`, `(Fx)_j = n^{-1/2} sum_k x_k e^{-2 pi i jk/n}`.
    pub fn dft(n: usize) -> Result<Self> {
        check_power_of_two(n, "DFT length")?;
        Ok(UnitaryOperator { n, field: Field::Complex, kind: Kind::Dft1d(FftPair::new(n)) })
    }

    /// Unitary 2D DFT on a `side x side` image flattened row-major.
    pub fn dft2d(side: usize) -> Result<Self> {
        check_power_of_two(side, "DFT side")?;
        Ok(UnitaryOperator {
            n: side * side,
            field: Field::Complex,
            kind: Kind::Dft2d { side, fft: FftPair::new(side) },
        })
    }

    /// Orthonormal Haar analysis operator with `levels` decomposition steps.
    /// Output layout: coarsest approximation first, then details from coarse
    /// to fine.
    pub fn haar(n: usize, levels: usize) -> Result<Self> {
        check_levels(n, levels)?;
        Ok(UnitaryOperator { n, field: Field::Real, kind: Kind::Haar1d { levels } })
    }

    /// Separable 2D Haar analysis (pyramid layout) on a square image
    /// flattened row-major.
    pub fn haar2d(side: usize, levels: usize) -> Result<Self> {
        check_levels(side, levels)?;
        Ok(UnitaryOperator {
            n: side * side,
            field: Field::Real,
            kind: Kind::Haar2d { side, levels },
        })
    }

    /// Explicit matrix; rejected unless unitary to [`DENSE_UNITARY_TOL`].
    pub fn dense(matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "dense operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let gram = matrix.adjoint() * &matrix;
        let mut deviation = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        if deviation > DENSE_UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        let field = if matrix.iter().all(|z| z.im == 0.0) { Field::Real } else { Field::Complex };
        Ok(UnitaryOperator { n, field, kind: Kind::Dense { matrix: Arc::new(matrix) } })
    }

    /// Real orthogonal matrix as an operator.
    pub fn dense_real(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::dense(matrix.map(|v| Complex64::new(v, 0.0)))
    }

    /// `measurement * sparsity^*`: measures signals given by their
    /// coefficient vectors in the sparsity basis.
    pub fn compose(measurement: &UnitaryOperator, sparsity: &UnitaryOperator) -> Result<Self> {
        if measurement.n != sparsity.n {
            return Err(Error::Dimension(format!(
                "cannot compose operators of dimension {} and {}",
                measurement.n, sparsity.n
            )));
        }
        let field = if measurement.field == Field::Real && sparsity.field == Field::Real {
            Field::Real
        } else {
            Field::Complex
        };
        Ok(UnitaryOperator {
            n: measurement.n,
            field,
            kind: Kind::Composed {
                measurement: Arc::new(measurement.clone()),
                sparsity: Arc::new(sparsity.clone()),
            },
        })
    }

    /// Block-diagonal operator acting on contiguous chunks, e.g. one 2D
    /// transform per color channel.
    pub fn block_diagonal(blocks: Vec<UnitaryOperator>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Dimension("block-diagonal operator needs at least one block".into()));
        }
        let n = blocks.iter().map(|b| b.n).sum();
        let field = if blocks.iter().all(|b| b.field == Field::Real) {
            Field::Real
        } else {
            Field::Complex
        };
        Ok(UnitaryOperator { n, field, kind: Kind::BlockDiagonal { blocks } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::Identity => format!("identity({})", self.n),
            Kind::Dft1d(_) => format!("dft({})", self.n),
            Kind::Dft2d { side, .. } => format!("dft2d({side}x{side})"),
            Kind::Haar1d { levels } => format!("haar({}, levels={levels})", self.n),
            Kind::Haar2d { side, levels } => format!("haar2d({side}x{side}, levels={levels})"),
            Kind::Dense { .. } => format!("dense({})", self.n),
            Kind::Composed { measurement, sparsity } => {
                format!("{} * {}^*", measurement.describe(), sparsity.describe())
            }
            Kind::BlockDiagonal { blocks } => {
                let parts: Vec<String> = blocks.iter().map(|b| b.describe()).collect();
                format!("blockdiag[{}]", parts.join(", "))
            }
        }
    }

    /// `F x`. Panics if `x.len() != n`.
    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.forward_inplace(&mut buf);
        buf
    }

    /// `F^* y`. Panics if `y.len() != n`.
    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut buf = y.to_vec();
        self.adjoint_inplace(&mut buf);
        buf
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_inplace(&mut buf);
        buf
    }

    pub fn forward_inplace(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "operator dimension mismatch");
        match &self.kind {
            Kind::Identity => {}
            Kind::Dft1d(fft) => {
                fft.forward.process(buf);
                scale(buf, 1.0 / (self.n as f64).sqrt());
            }
            Kind::Dft2d { side, fft } => dft2d_apply(buf, *side, &fft.forward),
            Kind::Haar1d { levels } => haar1d_forward(buf, *levels),
            Kind::Haar2d { side, levels } => haar2d_forward(buf, *side, *levels),
            Kind::Dense { matrix } => {
                let out: Vec<Complex64> = (0..self.n)
                    .map(|i| (0..self.n).map(|j| matrix[(i, j)] * buf[j]).sum())
                    .collect();
                buf.copy_from_slice(&out);
            }
            Kind::Composed { measurement, sparsity } => {
                sparsity.adjoint_inplace(buf);
                measurement.forward_inplace(buf);
            }
            Kind::BlockDiagonal { blocks } => {
                let mut start = 0;
                for block in blocks {
                    block.forward_inplace(&mut buf[start..start + block.n]);
                    start += block.n;
                }
            }
        }
    }

    pub fn adjoint_inplace(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "operator dimension mismatch");
        match &self.kind {
            Kind::Identity => {}
            Kind::Dft1d(fft) => {
                fft.inverse.process(buf);
                scale(buf, 1.0 / (self.n as f64).sqrt());
            }
            Kind::Dft2d { side, fft } => dft2d_apply(buf, *side, &fft.inverse),
            Kind::Haar1d { levels } => haar1d_inverse(buf, *levels),
            Kind::Haar2d { side, levels } => haar2d_inverse(buf, *side, *levels),
            Kind::Dense { matrix } => {
                let out: Vec<Complex64> = (0..self.n)
                    .map(|i| (0..self.n).map(|j| matrix[(j, i)].conj() * buf[j]).sum())
                    .collect();
                buf.copy_from_slice(&out);
            }
            Kind::Composed { measurement, sparsity } => {
                measurement.adjoint_inplace(buf);
                sparsity.forward_inplace(buf);
            }
            Kind::BlockDiagonal { blocks } => {
                let mut start = 0;
                for block in blocks {
                    block.adjoint_inplace(&mut buf[start..start + block.n]);
                    start += block.n;
                }
            }
        }
    }

    /// Row `j` (0-based) of the matrix, `f_j`, such that
    /// `(F x)_j = f_j^* x`.
    pub fn row_vector(&self, j: usize) -> Result<Vec<Complex64>> {
        if j >= self.n {
            return Err(Error::IndexOutOfRange { index: j, len: self.n });
        }
        let mut e = vec![Complex64::new(0.0, 0.0); self.n];
        e[j] = Complex64::new(1.0, 0.0);
        self.adjoint_inplace(&mut e);
        Ok(e)
    }

    /// Dense matrix, built column by column from `F e_j`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        let mut e = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            self.forward_inplace(&mut e);
            for i in 0..self.n {
                out[(i, j)] = e[i];
            }
        }
        out
    }
}

fn check_levels(n: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels >= usize::BITS as usize || n == 0 || n % (1usize << levels) != 0 {
        return Err(Error::Dimension(format!(
            "length {n} is not divisible by 2^{levels} (levels must be >= 1)"
        )));
    }
    Ok(())
}

fn scale(buf: &mut [Complex64], s: f64) {
    buf.iter_mut().for_each(|z| *z *= s);
}

fn dft2d_apply(buf: &mut [Complex64], side: usize, fft: &Arc<dyn Fft<f64>>) {
    for row in buf.chunks_exact_mut(side) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); side];
    for c in 0..side {
        for r in 0..side {
            col[r] = buf[r * side + c];
        }
        fft.process(&mut col);
        for r in 0..side {
            buf[r * side + c] = col[r];
        }
    }
    scale(buf, 1.0 / side as f64);
}

/// One analysis step on a strided sequence of length `len`.
fn haar_step(buf: &mut [Complex64], start: usize, stride: usize, len: usize, tmp: &mut [Complex64]) {
    let half = len / 2;
    for i in 0..half {
        let a = buf[start + 2 * i * stride];
        let b = buf[start + (2 * i + 1) * stride];
        tmp[i] = (a + b) * FRAC_1_SQRT_2;
        tmp[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    for i in 0..len {
        buf[start + i * stride] = tmp[i];
    }
}

fn haar_step_inverse(buf: &mut [Complex64], start: usize, stride: usize, len: usize, tmp: &mut [Complex64]) {
    let half = len / 2;
    for i in 0..half {
        let a = buf[start + i * stride];
        let d = buf[start + (half + i) * stride];
        tmp[2 * i] = (a + d) * FRAC_1_SQRT_2;
        tmp[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
    }
    for i in 0..len {
        buf[start + i * stride] = tmp[i];
    }
}

fn haar1d_forward(buf: &mut [Complex64], levels: usize) {
    let mut tmp = vec![Complex64::new(0.0, 0.0); buf.len()];
    let mut len = buf.len();
    for _ in 0..levels {
        haar_step(buf, 0, 1, len, &mut tmp);
        len /= 2;
    }
}

fn haar1d_inverse(buf: &mut [Complex64], levels: usize) {
    let n = buf.len();
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    for level in (0..levels).rev() {
        haar_step_inverse(buf, 0, 1, n >> level, &mut tmp);
    }
}

fn haar2d_forward(buf: &mut [Complex64], side: usize, levels: usize) {
    let mut tmp = vec![Complex64::new(0.0, 0.0); side];
    let mut len = side;
    for _ in 0..levels {
        for r in 0..len {
            haar_step(buf, r * side, 1, len, &mut tmp);
        }
        for c in 0..len {
            haar_step(buf, c, side, len, &mut tmp);
        }
        len /= 2;
    }
}

fn haar2d_inverse(buf: &mut [Complex64], side: usize, levels: usize) {
    let mut tmp = vec![Complex64::new(0.0, 0.0); side];
    for level in (0..levels).rev() {
        let len = side >> level;
        for c in 0..len {
            haar_step_inverse(buf, c, side, len, &mut tmp);
        }
        for r in 0..len {
            haar_step_inverse(buf, r * side, 1, len, &mut tmp);
        }
    }
}
