//! Degree histograms against their limits: shifted Poisson(1) in the
//! mesoscopic regime, a mixture over the birth time in the macroscopic one.

use memtree::limits::degree::{macro_degree_table, meso_degree_table};
use memtree::stats::{chi_square, tv_distance};
use memtree::tree::Collect;
use memtree::{grow_streaming, MemorySchedule};

fn main() -> memtree::Result<()> {
    let n = 1_000_000;
    let cases = [
        (MemorySchedule::mesoscopic(0.5)?, meso_degree_table(40)),
        (MemorySchedule::macroscopic(0.5)?, macro_degree_table(0.5, 40, 1e-10)),
    ];
    for (schedule, limit) in &cases {
        let hist = grow_streaming(schedule, n, 7, Collect::default())?.degree_histogram;
        println!("{schedule:?}");
        println!("  k   empirical   limit");
        for k in 1..=6 {
            let f = hist.get(&k).copied().unwrap_or(0) as f64 / n as f64;
            println!("  {k}   {f:.5}     {:.5}", limit[&k]);
        }
        let chi = chi_square(&hist, limit)?;
        println!(
            "  TV {:.5}, chi-square {:.1} on {} dof (p = {:.3})",
            tv_distance(&hist, limit)?,
            chi.statistic,
            chi.dof,
            chi.p_value
        );
    }
    Ok(())
}
