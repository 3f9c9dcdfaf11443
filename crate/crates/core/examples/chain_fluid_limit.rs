//! The ancestor labels of vertex n, rescaled, follow f_beta.

use memtree::exploration::{chain_sup_residual, simulate_chain, ChainConvention, StopRule};
use memtree::limits::f_beta;

fn main() -> memtree::Result<()> {
    let beta = 0.5;
    for n in [10_000u64, 1_000_000, 100_000_000] {
        let chain = simulate_chain(n, beta, 3, StopRule::Absorption, ChainConvention::ModelConsistent)?;
        let residual = chain_sup_residual(&chain, n, beta, 3.0)?;
        println!("n = {n:>10}: {} steps, sup residual {residual:.4}", chain.len() - 1);
    }

    let n = 1_000_000u64;
    let chain = simulate_chain(n, beta, 3, StopRule::Absorption, ChainConvention::ModelConsistent)?;
    let time_scale = (n as f64).powf(1.0 - beta);
    println!("\n   t    L/n     f_beta(t)");
    for t in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
        let step = ((t * time_scale) as usize).min(chain.len() - 1);
        println!("{t:4.1}  {:.4}  {:.4}", chain[step] as f64 / n as f64, f_beta(beta, t)?);
    }
    Ok(())
}
