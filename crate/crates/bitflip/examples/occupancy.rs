//! Expected total time in the ground state: the infinite-product integral
//! converges exactly when the model is transient. Divergence is decided by
//! classification, never by numerical blow-up, and finite values are
//! cross-checked against Monte Carlo holding-time accumulation.
//!
//!     cargo run --release --example occupancy

use bitflip::analytics::{
    ground_occupancy_bf, ground_occupancy_db, ground_probability, DEFAULT_T_MAX,
};
use bitflip::distributions::BitDistribution;
use bitflip::engine::{accumulated_ground_time, run_replicas, Model};
use bitflip::stats;

fn main() -> bitflip::Result<()> {
    // Recurrent BF: the integral diverges; the report carries the partial
    // integral as a lower bound.
    let rec = BitDistribution::geometric(0.3)?;
    let report = ground_occupancy_bf(&rec, 1e6, 1e-6)?;
    println!(
        "BF Geometric(0.3): diverged = {} (partial integral to 1e6: {:.2})",
        report.diverged, report.value
    );

    // Transient BF: finite, and Monte Carlo agrees.
    let trans = BitDistribution::geometric(0.7)?;
    let report = ground_occupancy_bf(&trans, DEFAULT_T_MAX, 1e-7)?;
    let totals = run_replicas(4_000, 9, |_, rng| {
        accumulated_ground_time(&trans, Model::Bf, 100_000, rng)
    });
    println!(
        "BF Geometric(0.7): quadrature {:.4} +- {:.1e}; MC {:.4} +- {:.4}",
        report.value,
        report.error_estimate,
        stats::mean(&totals),
        stats::standard_error(&totals),
    );
    println!(
        "  integrand at t = 0: {} (every factor is 1)",
        ground_probability(&trans, Model::Bf, 0.0)?
    );

    // DB with a sub-square-root stretched-exponential tail is transient.
    let db = BitDistribution::stretched_exp(1.0, 0.3)?;
    let report = ground_occupancy_db(&db, 1e7, 1e-6)?;
    let totals = run_replicas(3_000, 10, |_, rng| {
        accumulated_ground_time(&db, Model::Db, 50_000, rng)
    });
    println!(
        "DB StretchedExp(1, 0.3): quadrature {:.4}; MC {:.4} +- {:.4}",
        report.value,
        stats::mean(&totals),
        stats::standard_error(&totals),
    );
    Ok(())
}
