//! Height constants of the macroscopic regime and simulated heights.

use memtree::limits::constants::HeightConstants;
use memtree::tree::Collect;
use memtree::{grow_streaming, MemorySchedule};

fn main() -> memtree::Result<()> {
    println!("theta   kappa      1/kappa   alpha_max  gap");
    for i in 1..=9 {
        let c = HeightConstants::compute(i as f64 / 10.0, 1e-12)?;
        println!(
            "{:.1}     {:.6}  {:.4}    {:.4}     {:.1e}",
            c.theta,
            c.kappa,
            1.0 / c.kappa,
            c.alpha_max,
            c.duality_gap()
        );
    }

    // H_n / ln n creeps up towards 1/kappa; the correction is of order ln ln n
    let theta = 0.5;
    let target = 1.0 / HeightConstants::compute(theta, 1e-12)?.kappa;
    let schedule = MemorySchedule::macroscopic(theta)?;
    for n in [10_000u64, 100_000, 1_000_000] {
        let h: f64 = (0..10)
            .map(|r| grow_streaming(&schedule, n, r, Collect::default()).map(|s| s.height as f64))
            .sum::<memtree::Result<f64>>()?
            / 10.0;
        println!("n = {n:>8}: mean H/ln n = {:.3} (limit {target:.3})", h / (n as f64).ln());
    }
    Ok(())
}
