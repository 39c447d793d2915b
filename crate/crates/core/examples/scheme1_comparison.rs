//! Ten files, four users, two of them with three times the cache of the
//! others. Compares the two-level scheme with the layered memory-sharing
//! baseline optimized over its file split.

use coded_caching::baselines::scheme1_for;
use coded_caching::combinatorics::{int, rat, to_decimal};
use coded_caching::unequal::{rate_ueq, UnequalConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let resolution = 64;
    println!("{:>6} {:>10} {:>10} {:>24}", "M", "proposed", "layered", "best split");
    for q in 0..=10 {
        let m = rat(q, 3);
        let cfg = UnequalConfig::new(10, 4, 2, &m * int(3), m.clone())?;
        let ours = rate_ueq(&cfg)?.rate;
        let base = scheme1_for(&cfg, resolution)?;
        println!(
            "{:>6} {:>10} {:>10} {:>24}",
            m.to_string(),
            to_decimal(&ours, 6),
            to_decimal(&base.rate, 6),
            base.beta.to_string()
        );
        assert!(ours <= base.rate);
    }
    Ok(())
}
