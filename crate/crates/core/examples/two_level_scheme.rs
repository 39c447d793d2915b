//! How the rate of the two-level scheme moves as the larger caches grow,
//! with the quantities behind each point.

use coded_caching::combinatorics::{rat, to_decimal, Rational};
use coded_caching::equal_cache::rate_eq;
use coded_caching::unequal::{rate_ueq, UnequalConfig};

fn show(q: &Option<Rational>) -> String {
    q.as_ref().map(ToString::to_string).unwrap_or_else(|| "-".into())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k, l) = (6, 4, 2);
    let m = rat(3, 2);
    println!("N = {n}, K = {k}, L = {l}, M = {m}; equal-cache rate {}", rate_eq(n, k, &m)?);
    println!("{:>5} {:>9} {:>8} {:>3} {:>6} {:>6} {:>6} {:>6}", "Mhat", "rate", "", "sc", "F'", "M'", "Phi", "gamma");
    for q in 6..=24 {
        let mhat = rat(q, 4);
        let r = rate_ueq(&UnequalConfig::new(n, k, l, mhat.clone(), m.clone())?)?;
        let p = &r.params;
        println!(
            "{:>5} {:>9} {:>8} {:>3} {:>6} {:>6} {:>6} {:>6}",
            mhat.to_string(),
            r.rate.to_string(),
            to_decimal(&r.rate, 4),
            p.scenario.number(),
            p.fprime.to_string(),
            show(&p.mprime),
            show(&p.phi),
            show(&p.gamma)
        );
    }
    Ok(())
}
