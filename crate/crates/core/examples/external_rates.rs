//! Attaches rates computed by another tool to a sweep and reports the
//! largest ratio between the two-level scheme and those rates.

use coded_caching::baselines::parse_external_rates;
use coded_caching::combinatorics::{rat, to_decimal};
use coded_caching::unequal::{rate_ueq, UnequalConfig};

// Placeholder values in the table format; replace with real output to compare.
const TABLE: &str = "\
# N,K,L,Mhat,M,rate
10,4,2,1,1/3,3.4
10,4,2,2,2/3,2.9
10,4,2,3,1,2.35
10,4,2,6,2,1.3
10,4,2,7,7/3,1.3
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_external_rates(TABLE)?;
    let points: Vec<UnequalConfig> =
        (1..=6).map(|q| UnequalConfig::new(10, 4, 2, rat(q, 1), rat(q, 3))).collect::<Result<_, _>>()?;
    let external = table.attach(&points);

    let mut worst = None;
    for (cfg, ext) in points.iter().zip(&external) {
        let ours = rate_ueq(cfg)?.rate;
        let ratio = ext.as_ref().map(|e| &ours / e);
        println!(
            "M = {:>4}  proposed {:>8}  external {:>6}  ratio {}",
            cfg.m.to_string(),
            to_decimal(&ours, 5),
            ext.as_ref().map(ToString::to_string).unwrap_or_else(|| "-".into()),
            ratio.as_ref().map(|r| to_decimal(r, 4)).unwrap_or_else(|| "-".into())
        );
        if let Some(r) = ratio {
            if worst.as_ref().is_none_or(|w| r > *w) {
                worst = Some(r);
            }
        }
    }
    if let Some(w) = worst {
        println!("largest ratio {} ({})", w, to_decimal(&w, 4));
    }
    Ok(())
}
