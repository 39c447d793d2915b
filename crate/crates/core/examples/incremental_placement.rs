//! Grows a t = 1 placement to t = 2 without moving any cached bit, then
//! checks the merged pieces match a placement built for t = 2 directly.

use coded_caching::combinatorics::int;
use coded_caching::equal_cache::man_placement;
use coded_caching::incremental::{merged_view, refine_placement};
use coded_caching::plan::Layer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k, t) = (3, 3, 1);
    let base = man_placement(n, k, t, Layer::Alpha, &int(1));
    let grown = refine_placement(&base, n, k, t)?;

    println!("refined pieces of file A:");
    for piece in grown.refined.iter().filter(|p| p.file == 1) {
        println!("  {piece}  (added for user {})", piece.extra_user().unwrap());
    }
    for user in 1..=k {
        println!("user {user}: {} -> {}", base.cached_length(user), grown.cached_length(user));
    }

    let direct = man_placement(n, k, t + 1, Layer::Alpha, &int(1));
    let same = merged_view(&grown) == merged_view(&direct);
    println!("merged view equals the t = {} placement: {same}", t + 1);
    Ok(())
}
