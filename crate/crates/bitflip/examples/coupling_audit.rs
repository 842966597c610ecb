//! The domination coupling in action: common uniforms, a measure-preserving
//! swap map, and a buffer that absorbs repairs — plus the shared-randomness
//! coupling that orders the two models' return times.
//!
//!     cargo run --release --example coupling_audit

use bitflip::coupling::{buffer_index, run_domination_audit, run_pair_order_audit, CoupledPair};
use bitflip::distributions::BitDistribution;

fn main() -> bitflip::Result<()> {
    let dist = BitDistribution::geometric(0.4)?;
    println!(
        "buffer boundary K for Geometric(0.4): {}",
        buffer_index(&dist)
    );

    // Swap map on a hand-built discrepancy set: mass for a disagreeing
    // index reflects to the mirror interval, everything else is identity.
    let half = BitDistribution::geometric(0.5)?;
    let mut pair = CoupledPair::new(&half, 1);
    pair.set_upper_bit(2, true); // lower idle, upper active at k = 2
    println!("swap_map(0.60) with D = {{2}}: {}", pair.swap_map(0.60));
    println!("swap_map(0.30) with D = {{2}}: {}", pair.swap_map(0.30));
    println!("swap_map(0.10) with D = {{2}}: {}", pair.swap_map(0.10));

    let audit = run_domination_audit(&dist, 200, 1_000, 17);
    println!(
        "\ndomination audit ({} runs x {} steps): violations = {}, swap KS p = {:.3}",
        audit.runs, audit.steps_per_run, audit.violations, audit.swap_ks_p
    );

    let order = run_pair_order_audit(&BitDistribution::geometric(0.3)?, 3_000, 100_000, 18);
    println!(
        "tau_DB <= tau_BF on {}/{} both-finite runs (fraction {:.3})",
        order.both_finite - order.order_violations,
        order.both_finite,
        order.ordered_fraction
    );
    Ok(())
}
