//! The chain projected to its first m coordinates has uniform stationary
//! law, so the mean return to the all-idle window is exactly 2^m — for
//! any index distribution. Checked by simulation and by the exact
//! finite-chain linear system.
//!
//!     cargo run --release --example projected_return

use bitflip::distributions::BitDistribution;
use bitflip::engine::{exact, run_projected_return, run_replicas};
use bitflip::stats;

fn main() -> bitflip::Result<()> {
    let dist = BitDistribution::geometric(0.25)?;
    println!("projected BF return times, Geometric(0.25), 30000 replicas:");
    println!(
        "{:>3} {:>10} {:>10} {:>8}",
        "m", "MC mean", "target", "SEs off"
    );
    for m in 1..=4u32 {
        let taus = run_replicas(30_000, 100 + m as u64, |_, rng| {
            run_projected_return(m, &dist, 10_000_000, rng)
                .steps()
                .unwrap() as f64
        });
        let mean = stats::mean(&taus);
        let se = stats::standard_error(&taus);
        let target = (1u64 << m) as f64;
        println!(
            "{m:>3} {mean:>10.3} {target:>10} {:>8.2}",
            (mean - target) / se
        );
    }

    // The same 2^m appears as the exact mean return time of the full chain
    // when the distribution has finite support: solve the 2^m-state
    // hitting-time system for a lopsided three-bit table.
    let mean = exact::mean_return_time_bf(&[0.7, 0.2, 0.1])?;
    println!("\nexact mean return on 3 bits with pmf [0.7, 0.2, 0.1]: {mean:.12}");
    Ok(())
}
