//! Central limit behaviour of the active-bit count: replicas of N_t are
//! standardized with the *analytic* mean and variance series and compared
//! to a standard normal.
//!
//!     cargo run --release --example clt

use bitflip::distributions::BitDistribution;
use bitflip::engine::Model;
use bitflip::estimators::clt_check;

fn main() -> bitflip::Result<()> {
    let cases: Vec<(&str, BitDistribution, Model, f64)> = vec![
        (
            "BF Geometric(0.3), t = 1e4",
            BitDistribution::geometric(0.3)?,
            Model::Bf,
            1e4,
        ),
        (
            "DB StretchedExp(1, 0.5), t = e^15",
            BitDistribution::stretched_exp(1.0, 0.5)?,
            Model::Db,
            (15.0f64).exp(),
        ),
    ];
    for (name, dist, model, t) in cases {
        let s = clt_check(&dist, model, t, 8_000, 99)?;
        println!("{name} ({} replicas):", s.n_samples);
        println!("  KS distance to N(0,1)  {:.4}", s.ks_statistic.unwrap());
        println!("  standardized mean      {:+.4}", s.mean);
        println!("  standardized variance  {:.4}", s.variance.unwrap());
        println!("  skewness               {:+.4}", s.skewness.unwrap());
        println!(
            "  excess kurtosis        {:+.4}",
            s.excess_kurtosis.unwrap()
        );
    }
    Ok(())
}
