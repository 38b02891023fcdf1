use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vdcs::harness::{
    aggregate_geometric, compare_schemes, run_denoise_sweep, write_records, write_summary, Experiment,
    ExperimentConfig,
};
use vdcs::priors::difference_union;
use vdcs::recovery::{rip_check, write_vdsx};
use vdcs::sampling::draw_sample;
use vdcs::Error;

#[derive(Parser)]
#[command(name = "vdcs", version, about = "Variable-density compressed sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (key = value).
    #[arg(long)]
    config: PathBuf,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Local coherence vector, CSV `index,alpha,method`.
    Coherence(Common),
    /// Sampling plan of the configured scheme, CSV `index,p,d`.
    Plan(Common),
    /// RIP deviations at the first m of the grid, CSV `subspace,deviation`.
    RipCheck {
        #[command(flatten)]
        common: Common,
        /// Largest difference union to enumerate.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u128,
    },
    /// One recovery at the first (m, sigma) of the grids.
    Recover {
        #[command(flatten)]
        common: Common,
        /// Also dump the recovered signal as VDSX.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Full sweep of the configured scheme.
    DenoiseSweep(Common),
    /// Optimized and uniform sweeps on common random numbers.
    CompareSchemes(Common),
}

fn load_config(c: &Common) -> vdcs::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read {}: {io}", c.config.display())),
        other => other,
    })?;
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs `body` against the output file (or stdout) and writes the manifest.
fn emit(
    cfg: &ExperimentConfig,
    command: &str,
    body: impl FnOnce(&mut dyn Write) -> vdcs::Result<()>,
) -> vdcs::Result<()> {
    match &cfg.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            body(&mut w)?;
            w.flush()?;
            let mut m = BufWriter::new(File::create(sibling(path, ".manifest.txt"))?);
            writeln!(m, "# vdcs {} {command}", env!("CARGO_PKG_VERSION"))?;
            write!(m, "{}", cfg.to_text())?;
            m.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
        }
    }
    Ok(())
}

fn build_pool(threads: usize) -> vdcs::Result<()> {
    // A second initialization (only in tests) is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run(cli: Cli) -> vdcs::Result<()> {
    match cli.command {
        Command::Coherence(c) => {
            let cfg = load_config(&c)?;
            build_pool(cfg.threads)?;
            let exp = Experiment::new(cfg.clone())?;
            emit(&cfg, "coherence", |w| exp.alpha.write_csv(w))
        }
        Command::Plan(c) => {
            let cfg = load_config(&c)?;
            build_pool(cfg.threads)?;
            let exp = Experiment::new(cfg.clone())?;
            let plan = exp.plan(cfg.scheme)?;
            emit(&cfg, "plan", |w| plan.write_csv(w))
        }
        Command::RipCheck { common, budget } => {
            let cfg = load_config(&common)?;
            build_pool(cfg.threads)?;
            let exp = Experiment::new(cfg.clone())?;
            let t = difference_union(&exp.prior, budget)?;
            let plan = exp.plan(cfg.scheme)?;
            let sample = draw_sample(plan, cfg.m_grid[0], exp.trial_seed(0, 0))?;
            let report = rip_check(plan, &sample, &exp.operator, &t);
            eprintln!(
                "m={} subspaces={} max_deviation={:.6} holds={}",
                sample.m,
                t.count(),
                report.max_deviation,
                report.holds
            );
            emit(&cfg, "rip-check", |w| {
                writeln!(w, "subspace,deviation")?;
                for (i, d) in report.per_subspace.iter().enumerate() {
                    writeln!(w, "{i},{d:.16e}")?;
                }
                Ok(())
            })
        }
        Command::Recover { common, dump } => {
            let cfg = load_config(&common)?;
            build_pool(cfg.threads)?;
            let exp = Experiment::new(cfg.clone())?;
            let rec = exp.run_trial(cfg.scheme, 0, cfg.sigma_grid[0], 0);
            if let Some(path) = dump {
                let (res, _, _) = exp.recover(cfg.scheme, rec.m, rec.sigma, rec.seed)?;
                let mut w = BufWriter::new(File::create(path)?);
                write_vdsx(&mut w, &res.x_hat)?;
                w.flush()?;
            }
            emit(&cfg, "recover", |w| write_records(w, std::slice::from_ref(&rec)))
        }
        Command::DenoiseSweep(c) => {
            let cfg = load_config(&c)?;
            let records = run_denoise_sweep(&cfg)?;
            let summary = aggregate_geometric(&records)?;
            if let Some(out) = &cfg.output {
                write_summary(BufWriter::new(File::create(sibling(out, ".summary.csv"))?), &summary)?;
            }
            emit(&cfg, "denoise-sweep", |w| write_records(w, &records))
        }
        Command::CompareSchemes(c) => {
            let cfg = load_config(&c)?;
            let cmp = compare_schemes(&cfg)?;
            let all = cmp.all_records();
            if let Some(out) = &cfg.output {
                write_summary(BufWriter::new(File::create(sibling(out, ".summary.csv"))?), &aggregate_geometric(&all)?)?;
                cmp.write_paired(BufWriter::new(File::create(sibling(out, ".paired.csv"))?))?;
            }
            emit(&cfg, "compare-schemes", |w| write_records(w, &all))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Format(_) => 2,
                Error::Io(_) => 3,
                _ => 1,
            })
        }
    }
}
