//! Fringe distributions: the mesoscopic tree against Poisson(1)
//! Galton-Watson, the macroscopic tree against its branching process.

use std::collections::BTreeMap;

use memtree::analysis::empirical_fringe;
use memtree::fringe::FringeKey;
use memtree::limits::{poisson_gw_reference, sample_macro_fringe};
use memtree::rng::derive_seed;
use memtree::stats::tv_distance;
use memtree::{grow_tree, MemorySchedule};

fn main() -> memtree::Result<()> {
    let n = 200_000;
    let cap = 3;

    let meso = grow_tree(&MemorySchedule::mesoscopic(0.5)?, n, 1)?;
    let fringe = empirical_fringe(&meso, cap)?;
    let mut gw = poisson_gw_reference(cap);
    gw.remove(&FringeKey::Truncated);
    println!("mesoscopic beta=0.5 vs Poisson(1) Galton-Watson");
    for (key, p) in &gw {
        println!("  {:<10} {:.4}  {:.4}", shape(key), fringe.frequency(key), p);
    }
    println!("  TV {:.4}", tv_distance(&fringe.counts, &gw)?);

    let theta = 0.5;
    let macro_tree = grow_tree(&MemorySchedule::macroscopic(theta)?, n, 2)?;
    let fringe = empirical_fringe(&macro_tree, cap)?;
    let draws = 200_000u64;
    let mut reference: BTreeMap<FringeKey, f64> = BTreeMap::new();
    for i in 0..draws {
        let key = sample_macro_fringe(theta, derive_seed(3, i), cap)?.key();
        if key != FringeKey::Truncated {
            *reference.entry(key).or_insert(0.0) += 1.0 / draws as f64;
        }
    }
    println!("macroscopic theta=0.5 vs branching process sampler ({draws} draws)");
    for (key, p) in &reference {
        println!("  {:<10} {:.4}  {:.4}", shape(key), fringe.frequency(key), p);
    }
    println!("  TV {:.4}", tv_distance(&fringe.counts, &reference)?);
    Ok(())
}

fn shape(key: &FringeKey) -> &str {
    match key {
        FringeKey::Shape(code) => code,
        FringeKey::Truncated => "larger",
    }
}
