//! Below beta = 1/2 every vertex stays close to the path from the root to n.

use std::collections::BTreeMap;

use memtree::analysis::{max_dist_to_spine, spine_distances};
use memtree::stats::{cdf_dominance_counts, shifted_geometric_cdf};
use memtree::{grow_tree, MemorySchedule};

fn main() -> memtree::Result<()> {
    let beta = 0.3;
    let schedule = MemorySchedule::mesoscopic(beta)?;
    for n in [10_000u64, 100_000, 1_000_000] {
        let t = grow_tree(&schedule, n, 5)?;
        let mut hist = BTreeMap::new();
        for &d in &spine_distances(&t)[1..] {
            *hist.entry(d as u64).or_insert(0u64) += 1;
        }
        let dom = cdf_dominance_counts(&hist, shifted_geometric_cdf((n as f64).powf(-beta)), 0.02)?;
        println!(
            "n = {n:>8}: max distance {:>4}, scaled {:.4}, geometric bound {}",
            max_dist_to_spine(&t)?,
            max_dist_to_spine(&t)? as f64 / (n as f64).powf(1.0 - beta),
            if dom.pass { "holds" } else { "violated" }
        );
    }
    Ok(())
}
