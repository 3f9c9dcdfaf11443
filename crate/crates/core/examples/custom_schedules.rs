//! User-defined memory functions and attachment laws.

use memtree::analysis::{height, spine_distances};
use memtree::schedule::window;
use memtree::{grow_tree, AttachmentLaw, CustomJ, MemorySchedule};

fn main() -> memtree::Result<()> {
    let n = 100_000;
    // remember only the last 10 vertices
    let last_ten = MemorySchedule::custom_j(CustomJ::new("last-10", |m| m.saturating_sub(9).max(1)));
    // j(n) = floor(sqrt n): forgets almost nothing
    let sqrt = MemorySchedule::custom_j(CustomJ::new("sqrt", |m| ((m as f64).sqrt() as u64).max(1)));
    let power = MemorySchedule::sarrt(AttachmentLaw::power(3.0)?);
    for (name, s) in [("last 10", &last_ten), ("sqrt", &sqrt), ("sarrt power 3", &power)] {
        let t = grow_tree(s, n, 9)?;
        let far = spine_distances(&t).iter().copied().max().unwrap_or(0);
        println!("{name:<14} height {:>6}  farthest from spine {far:>4}", height(&t));
    }
    println!("window of vertex 1001 under last 10: {:?}", window(&last_ten, 1000)?);
    Ok(())
}
