//! Python bindings for `vdcs`: operators, coherences, sampling plans,
//! recovery and the experiment harness.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vdcs::coherence::{self, CoherenceMethod};
use vdcs::harness::{self, ExperimentConfig, ExperimentRecord};
use vdcs::recovery::{self, SparseSolverConfig};
use vdcs::sampling;
use vdcs::transforms::{self, Field};
use vdcs::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for vdcs::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse_field(s: &str) -> PyResult<Field> {
    match s {
        "real" => Ok(Field::Real),
        "complex" => Ok(Field::Complex),
        _ => Err(PyValueError::new_err(format!("field must be 'real' or 'complex', got {s:?}"))),
    }
}

/// Unitary measurement or sparsity operator.
#[pyclass(name = "UnitaryOperator", module = "vdcs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOperator {
    inner: transforms::UnitaryOperator,
}

#[pymethods]
impl PyOperator {
    #[staticmethod]
    fn dft(n: usize) -> PyResult<Self> {
        Ok(PyOperator { inner: transforms::UnitaryOperator::dft(n).py()? })
    }

    #[staticmethod]
    fn dft2d(side: usize) -> PyResult<Self> {
        Ok(PyOperator { inner: transforms::UnitaryOperator::dft2d(side).py()? })
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        Ok(PyOperator { inner: transforms::UnitaryOperator::identity(n).py()? })
    }

    #[staticmethod]
    fn haar(n: usize, levels: usize) -> PyResult<Self> {
        Ok(PyOperator { inner: transforms::UnitaryOperator::haar(n, levels).py()? })
    }

    /// `measurement * sparsity^*`, acting on coefficient vectors.
    #[staticmethod]
    fn compose(measurement: &PyOperator, sparsity: &PyOperator) -> PyResult<Self> {
        Ok(PyOperator { inner: transforms::UnitaryOperator::compose(&measurement.inner, &sparsity.inner).py()? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn forward(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.check(x.len())?;
        Ok(self.inner.forward(&x))
    }

    fn adjoint(&self, y: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.check(y.len())?;
        Ok(self.inner.adjoint(&y))
    }

    fn forward_real(&self, x: Vec<f64>) -> PyResult<Vec<Complex64>> {
        self.check(x.len())?;
        Ok(self.inner.forward_real(&x))
    }

    fn __repr__(&self) -> String {
        format!("UnitaryOperator({})", self.inner.describe())
    }
}

impl PyOperator {
    fn check(&self, len: usize) -> PyResult<()> {
        if len != self.inner.n() {
            return Err(PyValueError::new_err(format!("expected length {}, got {len}", self.inner.n())));
        }
        Ok(())
    }
}

/// Local coherence vector with its provenance.
#[pyclass(name = "CoherenceVector", module = "vdcs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCoherence {
    inner: coherence::CoherenceVector,
}

#[pymethods]
impl PyCoherence {
    #[new]
    #[pyo3(signature = (alpha, method = "exact"))]
    fn new(alpha: Vec<f64>, method: &str) -> PyResult<Self> {
        let m: CoherenceMethod = method.parse().py()?;
        Ok(PyCoherence { inner: coherence::CoherenceVector::new(alpha, m, "python").py()? })
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("CoherenceVector(n={}, method={}, norm={:.6})", self.inner.len(), self.inner.method.name(), self.inner.norm())
    }
}

/// Upper bound on the `s`-sparse local coherences of `op`'s rows.
#[pyfunction]
fn sparse_coherence_upper(op: &PyOperator, s: usize) -> PyResult<PyCoherence> {
    Ok(PyCoherence { inner: coherence::sparse_coherence_upper_vector(&op.inner, s).py()? })
}

/// Exact `s`-sparse local coherences (small `n` only).
#[pyfunction]
fn sparse_coherence_exact(op: &PyOperator, s: usize) -> PyResult<PyCoherence> {
    Ok(PyCoherence { inner: coherence::sparse_coherence_exact_vector(&op.inner, s).py()? })
}

/// Row probabilities and preconditioner.
#[pyclass(name = "SamplingPlan", module = "vdcs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPlan {
    inner: sampling::SamplingPlan,
}

#[pymethods]
impl PyPlan {
    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(PyPlan { inner: sampling::SamplingPlan::uniform(n).py()? })
    }

    #[staticmethod]
    fn optimized(alpha: &PyCoherence) -> PyResult<Self> {
        Ok(PyPlan { inner: sampling::SamplingPlan::optimized(&alpha.inner).py()? })
    }

    #[staticmethod]
    fn from_probabilities(p: Vec<f64>) -> PyResult<Self> {
        Ok(PyPlan { inner: sampling::SamplingPlan::from_probabilities(p).py()? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p().to_vec()
    }

    #[getter]
    fn d(&self) -> Vec<f64> {
        self.inner.d().to_vec()
    }

    /// Draws `m` rows with replacement.
    fn draw(&self, m: usize, seed: u64) -> PyResult<PySample> {
        Ok(PySample { inner: sampling::draw_sample(&self.inner, m, seed).py()? })
    }

    fn __repr__(&self) -> String {
        format!("SamplingPlan(n={}, max_d={:.6})", self.inner.n(), self.inner.max_d())
    }
}

/// Rows drawn from a plan.
#[pyclass(name = "DrawnSample", module = "vdcs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySample {
    inner: sampling::DrawnSample,
}

#[pymethods]
impl PySample {
    #[getter]
    fn omega(&self) -> Vec<usize> {
        self.inner.omega.clone()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    fn __repr__(&self) -> String {
        format!("DrawnSample(m={})", self.inner.m)
    }
}

#[pyfunction]
fn complexity_mu(alpha: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
    sampling::complexity_mu(&alpha, &p).py()
}

/// Returns the truncated vector and the 1-based cut index.
#[pyfunction]
fn unit_truncation(v: Vec<f64>) -> PyResult<(Vec<f64>, usize)> {
    sampling::unit_truncation(&v).py()
}

#[pyfunction]
fn noise_factor(plan: &PyPlan, sample: &PySample, alpha: &PyCoherence) -> PyResult<f64> {
    sampling::noise_factor(&plan.inner, &sample.inner, &alpha.inner).py()
}

#[pyfunction]
fn sample_complexity(mu: f64, ell: usize, log_m: f64, delta: f64, c: f64) -> PyResult<usize> {
    sampling::sample_complexity(mu, ell, log_m, delta, c).py()
}

/// Simulates noisy measurements of `x0` and recovers a `k`-sparse estimate
/// with the two-stage solver.
#[pyfunction]
#[pyo3(signature = (op, plan, sample, x0, sigma, k, seed = 0, field = "complex"))]
#[allow(clippy::too_many_arguments)]
fn recover_sparse<'py>(
    py: Python<'py>,
    op: &PyOperator,
    plan: &PyPlan,
    sample: &PySample,
    x0: Vec<f64>,
    sigma: f64,
    k: usize,
    seed: u64,
    field: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let field = parse_field(field)?;
    let (f, pl, s) = (&op.inner, &plan.inner, &sample.inner);
    let res = py
        .detach(|| {
            let meas = recovery::simulate_measurements(f, pl, s, &x0, sigma, field, seed)?;
            let cfg = SparseSolverConfig { seed, ..SparseSolverConfig::default() };
            recovery::recover_sparse_two_stage(pl, s, f, &meas, k, &cfg)?.with_truth(&x0)
        })
        .py()?;
    let out = PyDict::new(py);
    out.set_item("x_hat", res.x_hat)?;
    out.set_item("rre", res.rre)?;
    out.set_item("objective", res.objective)?;
    out.set_item("support", res.support)?;
    out.set_item("iterations", res.iterations)?;
    out.set_item("converged", res.converged)?;
    Ok(out)
}

fn record_dict<'py>(py: Python<'py>, r: &ExperimentRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scheme", r.scheme.name())?;
    d.set_item("m", r.m)?;
    d.set_item("sigma", r.sigma)?;
    d.set_item("trial", r.trial)?;
    d.set_item("seed", r.seed)?;
    d.set_item("rre", r.rre)?;
    d.set_item("objective", r.objective)?;
    d.set_item("noise_factor", r.noise_factor)?;
    d.set_item("theorem_bound", r.theorem_bound)?;
    d.set_item("corollary_bound", r.corollary_bound)?;
    Ok(d)
}

/// Runs the configured sweep from `key = value` text; returns one dict per
/// trial.
#[pyfunction]
fn denoise_sweep<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::parse_str(config, None).py()?;
    let records = py.detach(|| harness::run_denoise_sweep(&cfg)).py()?;
    records.iter().map(|r| record_dict(py, r)).collect()
}

/// Optimized and uniform sweeps on common random numbers.
#[pyfunction]
fn compare_schemes<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::parse_str(config, None).py()?;
    let cmp = py.detach(|| harness::compare_schemes(&cfg)).py()?;
    cmp.all_records().iter().map(|r| record_dict(py, r)).collect()
}

/// `(geo_mean, geo_std_error)` of positive values.
#[pyfunction]
fn geometric_stats(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = harness::geometric_stats(&values).py()?;
    Ok((s.geo_mean, s.geo_std_error))
}

/// Log-log least-squares slope over `m` in `window` (default: the
/// post-transition window).
#[pyfunction]
#[pyo3(signature = (points, window = None))]
fn fit_loglog_slope(points: Vec<(f64, f64)>, window: Option<(f64, f64)>) -> PyResult<f64> {
    let w = match window {
        Some(w) => w,
        None => harness::default_fit_window(&points).py()?,
    };
    Ok(harness::fit_loglog_slope(&points, w).py()?.slope)
}

#[pymodule]
#[pyo3(name = "vdcs")]
fn vdcs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyCoherence>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(sparse_coherence_upper, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_coherence_exact, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_mu, m)?)?;
    m.add_function(wrap_pyfunction!(unit_truncation, m)?)?;
    m.add_function(wrap_pyfunction!(noise_factor, m)?)?;
    m.add_function(wrap_pyfunction!(sample_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(recover_sparse, m)?)?;
    m.add_function(wrap_pyfunction!(denoise_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare_schemes, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_stats, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog_slope, m)?)?;
    Ok(())
}
