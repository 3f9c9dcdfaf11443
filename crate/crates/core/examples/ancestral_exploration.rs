//! Explore the ancestral lines of the youngest vertices and compare the
//! meeting point with the spanned subtree.

use memtree::analysis::{depth_of, spanned_subtree};
use memtree::exploration::explore_ancestral_lines;
use memtree::{grow_tree, MemorySchedule};

fn main() -> memtree::Result<()> {
    let n = 100_000;
    let t = grow_tree(&MemorySchedule::mesoscopic(0.5)?, n, 11)?;
    let trace = explore_ancestral_lines(&t, 3, None)?;
    println!("starts {:?}", trace.starts);
    println!(
        "lines {:?} met at vertex {} (depth {}) after {} reveals",
        trace.coalesced_pair,
        trace.terminal_label,
        depth_of(&t, trace.terminal_label)?,
        trace.termination
    );
    println!("reveals per line {:?}, max imbalance {}", trace.steps.last().unwrap().counts, trace.max_line_imbalance());

    let sub = spanned_subtree(&t, &trace.starts)?;
    println!("leaf depths {:?}", sub.leaf_depths);
    for bp in &sub.branchpoints {
        println!("branchpoint {} at depth {}", bp.label, bp.depth);
    }
    println!("pairwise distances {:?}", sub.pairwise_distances);
    Ok(())
}
