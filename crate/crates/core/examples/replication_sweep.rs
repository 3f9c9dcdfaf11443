//! A resumable replication sweep with checks, written to a directory.

use memtree::sweep::{run_sweep, Check, Statistic, SweepConfig};
use memtree::ScheduleSpec;

fn main() -> memtree::Result<()> {
    let out = std::env::temp_dir().join("memtree_sweep_example");
    let config = SweepConfig {
        schedule: ScheduleSpec::Mesoscopic { beta: 0.5 },
        n: vec![10_000, 40_000],
        replications: 8,
        master_seed: 2024,
        statistics: vec![Statistic::Height, Statistic::DegreeHist, Statistic::Chain { t_max: 3.0 }],
        checks: vec![Check { metric: "deg_1".into(), n: None, target: (-1.0f64).exp(), tolerance: 0.01 }],
        output_dir: Some(out.clone()),
        threads: None,
    };
    let report = run_sweep(&config)?;
    for a in &report.aggregates {
        println!("n = {:>6}  {:<16} mean {:.4}", a.n, a.metric, a.summary.mean);
    }
    for c in &report.comparisons {
        println!("{}: {} vs {}, {}", c.name, c.distance, c.threshold, if c.pass { "pass" } else { "fail" });
    }
    println!("config digest {}", report.config_digest);
    println!("artifacts in {}", out.display());
    Ok(())
}
