//! Return-time Monte Carlo for the BF chain: censoring, the divergent
//! mean, and fractional moments with their stability diagnostic.
//!
//!     cargo run --release --example return_times

use bitflip::distributions::BitDistribution;
use bitflip::engine::{run_replicas, run_return_time, BitState, Model};
use bitflip::estimators::return_stats;

fn main() -> bitflip::Result<()> {
    let dist = BitDistribution::geometric(0.3)?;
    let replicas = 30_000;
    let horizon = 1_000_000;

    let samples = run_replicas(replicas, 7, |_, rng| {
        run_return_time(&dist, BitState::ground(Model::Bf), horizon, rng)
    });

    // Finite return times of the BF chain from the ground state are even.
    assert!(samples
        .iter()
        .filter_map(|o| o.steps())
        .all(|tau| tau % 2 == 0));

    let summary = return_stats(&samples, &[0.2, 0.4])?;
    println!("Geometric(0.3), BF, {replicas} replicas, horizon {horizon}:");
    println!("  censored fraction   {:.4}", summary.censored_fraction);
    println!(
        "  mean tau            {:.1}  (unstable: {} — the true mean is infinite)",
        summary.mean, summary.mean_unstable
    );
    for fm in &summary.fractional_moments {
        println!(
            "  E tau^{:<4}          {:>8.3}  (n/10 drift {:.1}%)",
            fm.r,
            fm.estimate,
            fm.subsample_drift * 100.0
        );
    }
    println!();
    println!("Growing the sample grows the empirical mean (null recurrence):");
    for n in [1_000, 10_000, replicas as usize] {
        let s = return_stats(&samples[..n], &[])?;
        println!("  mean over {n:>6} samples: {:>10.1}", s.mean);
    }
    Ok(())
}
