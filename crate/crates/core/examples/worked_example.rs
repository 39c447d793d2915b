//! Four files, four users; users 1-3 cache two files' worth, user 4 one.
//!
//! Prints the placement of file A, the delivery for demands (A, B, C, D), and
//! the rate next to the equal-cache scheme that ignores the extra memory.

use coded_caching::combinatorics::int;
use coded_caching::equal_cache::rate_eq;
use coded_caching::plan::file_name;
use coded_caching::unequal::{rate_ueq, two_stage_scheme, UnequalConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = UnequalConfig::new(4, 4, 3, int(2), int(1))?;
    let (placement, plan) = two_stage_scheme(&cfg, &[1, 2, 3, 4])?;

    println!("pieces of file A:");
    for piece in placement.subfiles.iter().chain(&placement.refined).filter(|s| s.file == 1) {
        println!("  {piece}");
    }
    for user in 1..=cfg.k {
        println!("user {user} caches {} of a file", placement.cached_length(user));
    }

    println!("\ndelivery for demand (A, B, C, D):");
    for tx in &plan.transmissions {
        let parts: Vec<String> = tx
            .parts
            .iter()
            .map(|p| {
                let id = &p.segment.id;
                let origin = match &id.refinement {
                    Some(r) => format!("{}->{}", id.stage1_set, r.holders),
                    None => id.stage1_set.to_string(),
                };
                format!("{}{origin} for user {}", file_name(id.file), p.target)
            })
            .collect();
        println!("  {}  ({} of a file)", parts.join(" xor "), tx.length());
    }

    let r = rate_ueq(&cfg)?;
    println!("\nrate {} (equal caches of size 1: {})", r.rate, rate_eq(4, 4, &int(1))?);
    println!("F' = {}, M' = {}, R' = {}", r.params.fprime, r.params.mprime.unwrap(), r.params.rprime);
    Ok(())
}
