//! Grow one tree under each schedule family and export it.
//!
//! cargo run --example grow_and_export -- [n] [seed]

use std::fs::File;
use std::io::BufWriter;

use memtree::analysis::{degree_histogram, height};
use memtree::{grow_tree, AttachmentLaw, CustomJ, MemorySchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().map_or(10_000, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let schedules = [
        ("macroscopic theta=0.5", MemorySchedule::macroscopic(0.5)?),
        ("mesoscopic beta=0.5", MemorySchedule::mesoscopic(0.5)?),
        ("sarrt uniform(0,1)", MemorySchedule::sarrt(AttachmentLaw::uniform(0.0, 1.0)?)),
        ("custom j = 1", MemorySchedule::custom_j(CustomJ::constant(1))),
    ];
    for (name, schedule) in &schedules {
        let t = grow_tree(schedule, n, seed)?;
        let leaves = degree_histogram(&t).get(&1).copied().unwrap_or(0);
        println!("{name:<24} height {:>6}  leaves {:>6}", height(&t), leaves);
    }

    // a small tree as CSV and DOT
    let small = grow_tree(&schedules[1].1, 30, seed)?;
    let dir = std::env::temp_dir();
    small.write_csv(BufWriter::new(File::create(dir.join("memtree_small.csv"))?))?;
    small.write_dot(BufWriter::new(File::create(dir.join("memtree_small.dot"))?))?;
    println!("wrote {}/memtree_small.{{csv,dot}}", dir.display());
    Ok(())
}
