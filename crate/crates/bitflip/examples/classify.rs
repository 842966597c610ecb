//! Recurrence/transience verdicts for both models across the built-in
//! distribution families.
//!
//!     cargo run --example classify

use bitflip::distributions::BitDistribution;

fn main() -> bitflip::Result<()> {
    let table: Vec<(String, BitDistribution)> = vec![
        ("Geometric(0.4)".into(), BitDistribution::geometric(0.4)?),
        ("Geometric(0.5)".into(), BitDistribution::geometric(0.5)?),
        ("Geometric(0.6)".into(), BitDistribution::geometric(0.6)?),
        (
            "StretchedExp(1.0, 0.3)".into(),
            BitDistribution::stretched_exp(1.0, 0.3)?,
        ),
        (
            "StretchedExp(1.0, 0.7)".into(),
            BitDistribution::stretched_exp(1.0, 0.7)?,
        ),
        (
            "KappaCounterexample".into(),
            BitDistribution::kappa_counterexample(),
        ),
        (
            "FiniteTable[.5,.3,.2]".into(),
            BitDistribution::finite_table(&[0.5, 0.3, 0.2])?,
        ),
    ];

    println!("{:<24} {:>12} {:>12}", "distribution", "BF", "DB");
    for (name, dist) in &table {
        println!(
            "{name:<24} {:>12} {:>12}",
            dist.classify_bf().to_string(),
            dist.classify_db().to_string()
        );
    }
    println!();
    println!("BF goes transient once the geometric ratio exceeds 1/2; DB stays");
    println!("recurrent for every geometric ratio and only loses recurrence to");
    println!("stretched-exponential tails with gamma < 1/2. The kappa family is");
    println!("the counterexample where the DB tail-ratio test is inconclusive.");
    Ok(())
}
