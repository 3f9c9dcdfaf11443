//! The statistics toolkit on its own: KS with a DKW threshold, total
//! variation and pooled chi-square.

use std::collections::BTreeMap;

use memtree::limits::poisson_pmf;
use memtree::rng::{stream, unit_f64};
use memtree::stats::{chi_square, dkw_epsilon, ks_one_sample, tv_distance};

fn main() -> memtree::Result<()> {
    let mut rng = stream(1);
    let m = 5_000;
    let u: Vec<f64> = (0..m).map(|_| unit_f64(&mut rng)).collect();
    let ks = ks_one_sample(&u, |x| x.clamp(0.0, 1.0))?;
    println!("uniform sample: KS {ks:.4}, DKW 95% threshold {:.4}", dkw_epsilon(m, 0.05));
    let squared: Vec<f64> = u.iter().map(|x| x * x).collect();
    println!("squared sample vs uniform: KS {:.4}", ks_one_sample(&squared, |x| x.clamp(0.0, 1.0))?);

    // Poisson(1) by inversion
    let pmf: BTreeMap<u64, f64> = (0..20).map(|k| (k, poisson_pmf(1.0, k))).collect();
    let mut hist = BTreeMap::new();
    for _ in 0..m {
        let (mut k, mut acc, x) = (0u64, pmf[&0], unit_f64(&mut rng));
        while x > acc && k < 19 {
            k += 1;
            acc += pmf[&k];
        }
        *hist.entry(k).or_insert(0u64) += 1;
    }
    let chi = chi_square(&hist, &pmf)?;
    println!(
        "Poisson(1) draws: TV {:.4}, chi-square {:.2} on {} dof, p = {:.3}",
        tv_distance(&hist, &pmf)?,
        chi.statistic,
        chi.dof,
        chi.p_value
    );
    Ok(())
}
