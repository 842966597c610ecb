//! The two fractional-moment exponents of the BF return time for
//! geometric ratios p in (0, 1/2): E tau^r is finite for r below the
//! lower curve and infinite above the upper one. Emits plot-ready CSV.
//!
//!     cargo run --example moment_bounds

use bitflip::analytics::moment_bounds;

fn main() -> bitflip::Result<()> {
    println!("p,r_lower,r_upper");
    for i in 1..=49 {
        let p = i as f64 * 0.01;
        let mb = moment_bounds(p)?;
        println!("{},{},{}", mb.p, mb.r_lower, mb.r_upper);
    }
    eprintln!();
    eprintln!("r_lower = 1 - log 2 / log(1/p); r_upper = 1 - log(2-p) / log(1/p).");
    eprintln!("At p = 0.25 the lower exponent is exactly 1/2.");
    Ok(())
}
