//! Bit-level check: random files, real XORs, every user decodes from its
//! own cache and the broadcast. Then one flipped bit shows the check bites.

use coded_caching::combinatorics::{int, rat};
use coded_caching::simulator::{verify, DemandMode, Fault, Instance};
use coded_caching::unequal::UnequalConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instances = [
        Instance::Equal { n: 4, k: 4, m: int(1) },
        Instance::Proposed(UnequalConfig::new(4, 4, 3, int(2), int(1))?),
        Instance::Proposed(UnequalConfig::new(5, 4, 1, rat(9, 2), rat(3, 4))?),
    ];
    for instance in &instances {
        let summary = verify(instance, DemandMode::Exhaustive, 42, None)?;
        println!(
            "{instance}\n  {}/{} demands decode, worst load {} (formula {}), files of {} bits",
            summary.passed(),
            summary.reports.len(),
            summary.worst_load,
            summary.formula_rate,
            summary.f_bits
        );
    }

    let faulty = verify(&instances[1], DemandMode::Distinct, 42, Some(Fault { transmission: 3, bit: 0 }))?;
    let first = faulty.first_failure().expect("a flipped bit must break decoding");
    println!("with one flipped bit: {}/{} pass", faulty.passed(), faulty.reports.len());
    println!("  {}", first.to_record(faulty.f_bits));
    Ok(())
}
