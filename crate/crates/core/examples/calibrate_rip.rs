//! Calibrates the constant of `sample_complexity` for the RIP on a union of
//! 20 random 5-dimensional subspaces of R^256 under optimized DFT sampling.
//!
//! For each candidate C, reports the fraction of seeds on which the RIP
//! holds at m(C) and fails at m(C)/8. The recorded constant is the smallest
//! C on the grid whose hold rate reaches 1 - delta/5 = 0.98 (C = 1.1).
//!
//!     cargo run --release --example calibrate_rip

use vdcs::coherence::coherence_vector;
use vdcs::priors::SubspaceUnion;
use vdcs::recovery::rip_check;
use vdcs::rng;
use vdcs::sampling::{draw_sample, sample_complexity, SamplingPlan};
use vdcs::transforms::UnitaryOperator;

const UNION_SEED: u64 = 8;
const CALIBRATION_MASTER: u64 = 0xC0FFEE;
const SEEDS: usize = 200;

fn main() -> vdcs::Result<()> {
    let n = 256;
    let union = SubspaceUnion::random(&mut rng::stream(UNION_SEED, 0), n, 20, 5)?;
    let f = UnitaryOperator::dft(n)?;
    let alpha = coherence_vector(&f, &union)?;
    let plan = SamplingPlan::optimized(&alpha)?;
    println!("||alpha||^2 = {:.4}", alpha.norm().powi(2));
    println!("{:>6} {:>6} {:>10} {:>12}", "C", "m", "hold(m)", "fail(m/8)");
    for step in 1..=40 {
        let c = 0.1 * step as f64;
        let m = sample_complexity(alpha.norm(), 5, 20f64.ln(), 0.1, c)?;
        let small = (m / 8).max(1);
        let mut hold = 0;
        let mut fail = 0;
        for i in 0..SEEDS {
            let seed = rng::derive(CALIBRATION_MASTER, 0, i as u64);
            hold += rip_check(&plan, &draw_sample(&plan, m, seed)?, &f, &union).holds as usize;
            fail += !rip_check(&plan, &draw_sample(&plan, small, seed)?, &f, &union).holds as usize;
        }
        let (h, fl) = (hold as f64 / SEEDS as f64, fail as f64 / SEEDS as f64);
        println!("{c:>6.2} {m:>6} {h:>10.3} {fl:>12.3}");
    }
    Ok(())
}
