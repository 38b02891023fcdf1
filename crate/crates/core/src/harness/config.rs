//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors. Grids are comma-separated lists; `m_grid` also accepts
//! `logspace(lo, hi, count)` (rounded to integers, duplicates dropped).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::LatentDescentConfig;
use crate::recovery::SparseSolverConfig;
use crate::transforms::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    Sparse,
    Union,
    Generative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementKind {
    Dft,
    Dft2d,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparsityKind {
    Identity,
    Haar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Optimized,
    Uniform,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoherenceChoice {
    /// Upper bound for sparse priors, exact for unions, empirical for
    /// generative priors.
    Auto,
    UpperBound,
    Exact,
    Empirical,
}

/// Ground-truth generator for sparse priors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    /// Uniformly random support, Gaussian values, unit norm.
    RandomSupport,
    /// A random piecewise-constant signal truncated to its `k` largest
    /// coefficients in the sparsity basis, unit norm.
    PiecewiseConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Two-stage for sparse priors, oracle for unions, latent descent for
    /// generative priors.
    Auto,
    TwoStage,
    Oracle,
    Latent,
}

macro_rules! named_enum {
    ($t:ty, $($name:literal => $v:expr),+ $(,)?) => {
        impl $t {
            pub fn name(self) -> &'static str {
                $(if self == $v { return $name; })+
                unreachable!()
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    _ => Err(Error::Config(format!("unknown {} {s:?}", stringify!($t)))),
                }
            }
        }
    };
}

named_enum!(PriorKind, "sparse" => PriorKind::Sparse, "union" => PriorKind::Union, "generative" => PriorKind::Generative);
named_enum!(MeasurementKind, "dft" => MeasurementKind::Dft, "dft2d" => MeasurementKind::Dft2d, "identity" => MeasurementKind::Identity);
named_enum!(SparsityKind, "identity" => SparsityKind::Identity, "haar" => SparsityKind::Haar);
named_enum!(Scheme, "optimized" => Scheme::Optimized, "uniform" => Scheme::Uniform, "custom" => Scheme::Custom);
named_enum!(CoherenceChoice, "auto" => CoherenceChoice::Auto, "upper_bound" => CoherenceChoice::UpperBound,
    "exact" => CoherenceChoice::Exact, "empirical" => CoherenceChoice::Empirical);
named_enum!(SignalKind, "random_support" => SignalKind::RandomSupport, "piecewise_constant" => SignalKind::PiecewiseConstant);
named_enum!(SolverKind, "auto" => SolverKind::Auto, "two_stage" => SolverKind::TwoStage,
    "oracle" => SolverKind::Oracle, "latent" => SolverKind::Latent);

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub prior: PriorKind,
    /// Signal length (sparse priors; inferred from files otherwise).
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub measurement: MeasurementKind,
    pub sparsity_basis: SparsityKind,
    pub haar_levels: usize,
    pub union_file: Option<PathBuf>,
    pub weights_file: Option<PathBuf>,
    /// Fixed ground truth: a PGM image sparsified to `k` coefficients.
    pub image_file: Option<PathBuf>,
    pub signal: SignalKind,
    /// Jumps per piecewise-constant signal.
    pub jumps: usize,
    pub scheme: Scheme,
    pub custom_p_file: Option<PathBuf>,
    pub coherence: CoherenceChoice,
    pub coherence_latents: usize,
    pub m_grid: Vec<usize>,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub field: Field,
    pub solver: SolverKind,
    pub iht: SparseSolverConfig,
    pub latent: LatentDescentConfig,
    /// Failure probability used for the theorem bound column.
    pub delta: f64,
    /// Measure wall time per trial; output is then no longer byte-reproducible.
    pub timing: bool,
    pub output: Option<PathBuf>,
    /// Worker threads, 0 for the default pool.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            prior: PriorKind::Sparse,
            n: None,
            k: None,
            measurement: MeasurementKind::Dft,
            sparsity_basis: SparsityKind::Haar,
            haar_levels: 1,
            union_file: None,
            weights_file: None,
            image_file: None,
            signal: SignalKind::RandomSupport,
            jumps: 6,
            scheme: Scheme::Optimized,
            custom_p_file: None,
            coherence: CoherenceChoice::Auto,
            coherence_latents: 256,
            m_grid: Vec::new(),
            sigma_grid: Vec::new(),
            trials: 1,
            master_seed: 0,
            field: Field::Complex,
            solver: SolverKind::Auto,
            iht: SparseSolverConfig::default(),
            latent: LatentDescentConfig { iterations: 2000, ..LatentDescentConfig::default() },
            delta: 0.05,
            timing: false,
            output: None,
            threads: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

/// `lo, ..., hi` log-spaced and rounded, without duplicates.
pub fn logspace_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<usize>> {
    if !(lo >= 1.0 && hi >= lo) || count == 0 {
        return Err(Error::Config(format!("logspace({lo}, {hi}, {count}) needs 1 <= lo <= hi, count >= 1")));
    }
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let frac = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
        let v = (lo.ln() + frac * (hi.ln() - lo.ln())).exp().round() as usize;
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

fn parse_m_grid(v: &str) -> Result<Vec<usize>> {
    if let Some(inner) = v.strip_prefix("logspace(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("m_grid: bad logspace {v:?}")));
        }
        return logspace_grid(parse("m_grid", parts[0])?, parse("m_grid", parts[1])?, parse("m_grid", parts[2])?);
    }
    v.split(',').map(|s| parse("m_grid", s.trim())).collect()
}

impl ExperimentConfig {
    pub fn parse_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "prior" => c.prior = v.parse()?,
                "n" => c.n = Some(parse(key, v)?),
                "k" => c.k = Some(parse(key, v)?),
                "measurement" => c.measurement = v.parse()?,
                "sparsity_basis" => c.sparsity_basis = v.parse()?,
                "haar_levels" => c.haar_levels = parse(key, v)?,
                "union_file" => c.union_file = Some(resolve(v)),
                "weights_file" => c.weights_file = Some(resolve(v)),
                "image_file" => c.image_file = Some(resolve(v)),
                "signal" => c.signal = v.parse()?,
                "jumps" => c.jumps = parse(key, v)?,
                "scheme" => c.scheme = v.parse()?,
                "custom_p_file" => c.custom_p_file = Some(resolve(v)),
                "coherence" => c.coherence = v.parse()?,
                "coherence_latents" => c.coherence_latents = parse(key, v)?,
                "m_grid" => c.m_grid = parse_m_grid(v)?,
                "sigma_grid" => {
                    c.sigma_grid = v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?
                }
                "trials" => c.trials = parse(key, v)?,
                "master_seed" => c.master_seed = parse(key, v)?,
                "field" => c.field = v.parse().map_err(|_| Error::Config(format!("field: {v:?}")))?,
                "solver" => c.solver = v.parse()?,
                "iht.max_iters" => c.iht.max_iters = parse(key, v)?,
                "iht.tolerance" => c.iht.tolerance = parse(key, v)?,
                "iht.exchange_rounds" => c.iht.exchange_rounds = parse(key, v)?,
                "iht.exchange_candidates" => c.iht.exchange_candidates = parse(key, v)?,
                "latent.restarts" => c.latent.restarts = parse(key, v)?,
                "latent.iterations" => c.latent.iterations = parse(key, v)?,
                "latent.step" => c.latent.step = parse(key, v)?,
                "latent.decay" => c.latent.decay = parse(key, v)?,
                "latent.patience" => c.latent.patience = parse(key, v)?,
                "latent.polish" => c.latent.polish = parse_bool(key, v)?,
                "delta" => c.delta = parse(key, v)?,
                "timing" => c.timing = parse_bool(key, v)?,
                "output" => c.output = Some(resolve(v)),
                "threads" => c.threads = parse(key, v)?,
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return fail("m_grid must be a non-empty list of positive counts".into());
        }
        if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return fail("sigma_grid must be a non-empty list of nonnegative values".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta = {} not in (0, 1)", self.delta));
        }
        match self.prior {
            PriorKind::Sparse => {
                if self.k.is_none() {
                    return fail("sparse prior needs k".into());
                }
                if self.n.is_none() && self.image_file.is_none() {
                    return fail("sparse prior needs n (or image_file)".into());
                }
                if let (Some(n), Some(k)) = (self.n, self.k) {
                    if k == 0 || k > n {
                        return fail(format!("k = {k} must lie in 1..={n}"));
                    }
                }
            }
            PriorKind::Union => {
                if self.union_file.is_none() {
                    return fail("union prior needs union_file".into());
                }
            }
            PriorKind::Generative => {
                if self.weights_file.is_none() {
                    return fail("generative prior needs weights_file".into());
                }
            }
        }
        if self.signal == SignalKind::PiecewiseConstant && self.prior != PriorKind::Sparse {
            return fail("signal = piecewise_constant needs a sparse prior".into());
        }
        if self.scheme == Scheme::Custom && self.custom_p_file.is_none() {
            return fail("scheme = custom needs custom_p_file".into());
        }
        for p in [&self.union_file, &self.weights_file, &self.image_file, &self.custom_p_file].into_iter().flatten() {
            if !p.exists() {
                return fail(format!("referenced file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// The resolved configuration in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("prior", self.prior.name().into());
        if let Some(n) = self.n {
            put("n", n.to_string());
        }
        if let Some(k) = self.k {
            put("k", k.to_string());
        }
        put("measurement", self.measurement.name().into());
        put("sparsity_basis", self.sparsity_basis.name().into());
        put("haar_levels", self.haar_levels.to_string());
        for (k, p) in [
            ("union_file", &self.union_file),
            ("weights_file", &self.weights_file),
            ("image_file", &self.image_file),
            ("custom_p_file", &self.custom_p_file),
        ] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put("signal", self.signal.name().into());
        put("jumps", self.jumps.to_string());
        put("scheme", self.scheme.name().into());
        put("coherence", self.coherence.name().into());
        put("coherence_latents", self.coherence_latents.to_string());
        put("m_grid", join(&self.m_grid));
        put("sigma_grid", join(&self.sigma_grid));
        put("trials", self.trials.to_string());
        put("master_seed", self.master_seed.to_string());
        put("field", self.field.name().into());
        put("solver", self.solver.name().into());
        put("iht.max_iters", self.iht.max_iters.to_string());
        put("iht.tolerance", self.iht.tolerance.to_string());
        put("iht.exchange_rounds", self.iht.exchange_rounds.to_string());
        put("iht.exchange_candidates", self.iht.exchange_candidates.to_string());
        put("latent.restarts", self.latent.restarts.to_string());
        put("latent.iterations", self.latent.iterations.to_string());
        put("latent.step", self.latent.step.to_string());
        put("latent.decay", self.latent.decay.to_string());
        put("latent.patience", self.latent.patience.to_string());
        put("latent.polish", self.latent.polish.to_string());
        put("delta", self.delta.to_string());
        put("timing", self.timing.to_string());
        if let Some(o) = &self.output {
            put("output", o.display().to_string());
        }
        put("threads", self.threads.to_string());
        s
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "# sparse sweep\nprior = sparse\nn = 64\nk = 2\nhaar_levels = 3\nm_grid = 8, 16,32\nsigma_grid = 0.5,1\ntrials = 3\n";

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::parse_str(BASIC, None).unwrap();
        assert_eq!(c.m_grid, vec![8, 16, 32]);
        assert_eq!(c.sigma_grid, vec![0.5, 1.0]);
        assert_eq!(c.haar_levels, 3);
        let again = ExperimentConfig::parse_str(&c.to_text(), None).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(matches!(
            ExperimentConfig::parse_str(&format!("{BASIC}colour = red\n"), None),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::parse_str(&BASIC.replace("trials = 3", "trials = x"), None).is_err());
        assert!(ExperimentConfig::parse_str(&BASIC.replace("trials = 3", "trials = 0"), None).is_err());
        assert!(ExperimentConfig::parse_str(&format!("{BASIC}union_file = /nonexistent\n"), None).is_err());
    }

    #[test]
    fn logspace_grid_endpoints() {
        let g = parse_m_grid("logspace(69, 4096, 16)").unwrap();
        assert_eq!(g.first(), Some(&69));
        assert_eq!(g.last(), Some(&4096));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
