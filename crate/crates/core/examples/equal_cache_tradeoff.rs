//! Rate against cache size for the equal-cache scheme, including the
//! memory-shared points between integer placements.

use coded_caching::combinatorics::{rat, to_decimal};
use coded_caching::equal_cache::equal_params;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k) = (6, 4);
    println!("N = {n}, K = {k}");
    println!("{:>6} {:>6} {:>6} {:>6} {:>10}", "M", "t", "t_int", "alpha", "rate");
    for q in 0..=4 * n as i64 {
        let m = rat(q, 4);
        let p = equal_params(n, k, &m)?;
        let rate = p.rate();
        println!(
            "{:>6} {:>6} {:>6} {:>6} {:>10}  {}",
            m.to_string(),
            p.t.to_string(),
            p.t_int,
            p.alpha.to_string(),
            rate.to_string(),
            to_decimal(&rate, 4)
        );
    }
    Ok(())
}
