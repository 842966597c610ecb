//! Continuous-time snapshots two ways: the exact Poisson embedding versus
//! independent per-bit marginals, plus the closed-form single-bit
//! probabilities.
//!
//!     cargo run --release --example snapshots

use bitflip::analytics::active_probability;
use bitflip::distributions::BitDistribution;
use bitflip::engine::{run_replicas, sample_snapshot, Model, SnapshotMethod};
use bitflip::stats;

fn main() -> bitflip::Result<()> {
    let dist = BitDistribution::geometric(0.5)?;
    let t = 30.0;
    let n = 20_000;

    for model in [Model::Bf, Model::Db] {
        let embed: Vec<f64> = run_replicas(n, 1, |_, rng| {
            sample_snapshot(model, &dist, t, SnapshotMethod::PoissonEmbed, rng)
                .map(|s| s.active_count() as f64)
        })
        .into_iter()
        .collect::<bitflip::Result<_>>()?;
        let perbit: Vec<f64> = run_replicas(n, 2, |_, rng| {
            sample_snapshot(model, &dist, t, SnapshotMethod::PerBit, rng)
                .map(|s| s.active_count() as f64)
        })
        .into_iter()
        .collect::<bitflip::Result<_>>()?;
        let ks = stats::ks_two_sample(&embed, &perbit);
        println!(
            "{model}: N_t mean {:.3} (embed) vs {:.3} (per-bit); two-sample KS p = {:.3}",
            stats::mean(&embed),
            stats::mean(&perbit),
            ks.p_value
        );
    }

    println!("\nper-bit active probabilities at t = {t} (empirical vs closed form):");
    let hits = run_replicas(n, 3, |_, rng| {
        let s = sample_snapshot(Model::Bf, &dist, t, SnapshotMethod::PoissonEmbed, rng).unwrap();
        [1u32, 2, 3, 4].map(|k| s.active_contains(k) as u64)
    });
    for (i, k) in [1u32, 2, 3, 4].into_iter().enumerate() {
        let phat = hits.iter().map(|h| h[i]).sum::<u64>() as f64 / n as f64;
        let x = dist.pmf(k)? * t;
        println!(
            "  bit {k}: {phat:.4} vs (1 - e^(-2 p_k t))/2 = {:.4}",
            active_probability(Model::Bf, x)
        );
    }
    Ok(())
}
