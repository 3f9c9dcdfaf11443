//! Samplers for the limiting objects: Poisson(1) Galton-Watson trees, the
//! macroscopic branching process and the SARRT fringe.

use std::collections::BTreeMap;

use memtree::fringe::FringeKey;
use memtree::limits::{poisson_gw_reference, sample_macro_fringe, sample_poisson_gw, sample_sarrt_fringe};
use memtree::AttachmentLaw;

fn main() -> memtree::Result<()> {
    let draws = 100_000u64;
    let cap = 3;
    let law = AttachmentLaw::uniform(0.5, 1.0)?;
    let mut gw = BTreeMap::new();
    let mut bp = BTreeMap::new();
    let mut sarrt = BTreeMap::new();
    for i in 0..draws {
        *gw.entry(sample_poisson_gw(i, cap)?.key()).or_insert(0u64) += 1;
        *bp.entry(sample_macro_fringe(0.5, i, cap)?.key()).or_insert(0u64) += 1;
        *sarrt.entry(sample_sarrt_fringe(&|v| law.density(v), law.density_sup(), i, cap)?.key()).or_insert(0u64) += 1;
    }
    let exact = poisson_gw_reference(cap);
    println!("shape       GW exact  GW draws  macro 1/2  SARRT U(1/2,1)");
    for key in exact.keys() {
        let f = |h: &BTreeMap<FringeKey, u64>| h.get(key).copied().unwrap_or(0) as f64 / draws as f64;
        let name = match key {
            FringeKey::Shape(c) => c.as_str(),
            FringeKey::Truncated => "larger",
        };
        println!("{name:<10}  {:.4}    {:.4}    {:.4}     {:.4}", exact[key], f(&gw), f(&bp), f(&sarrt));
    }
    Ok(())
}
