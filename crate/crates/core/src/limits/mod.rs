//! Limit objects the simulated trees are compared against.

pub mod branchpoint;
pub mod constants;
pub mod degree;
pub mod samplers;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fringe::{FringeKey, FringeTree};

pub use branchpoint::{branchpoint_cdf, branchpoint_sample, BranchpointLaw};
pub use constants::{
    alpha_max, c_theta, kappa, lambda_mgf, lambda_mgf_derivative, legendre, mu_drift, mu_of, phi,
    psi, HeightConstants,
};
pub use degree::{macro_degree_pmf, meso_degree_pmf, poisson_pmf};
pub use samplers::{sample_macro_fringe, sample_poisson_gw, sample_sarrt_fringe};

/// Fluid limit of the rescaled ancestor label `L(t sqrt-scale) / n`:
/// `(1 - (1-beta) t / 2)^{1/(1-beta)}` until it hits 0 at `t = 2/(1-beta)`.
pub fn f_beta(beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid("t", format!("must be non-negative, got {t}")));
    }
    let base = 1.0 - 0.5 * (1.0 - beta) * t;
    Ok(if base <= 0.0 { 0.0 } else { base.powf(1.0 / (1.0 - beta)) })
}

/// `|{ i >= j : i - i^beta <= j }|`, the number of arrivals that may attach to `j`.
pub fn n_j_count(j: u64, beta: f64) -> u64 {
    // i - i^beta is increasing for i >= 1, so the members form a run starting at j
    let jf = j as f64;
    let bound = j + 2 * (jf.powf(beta).ceil() as u64) + 2;
    (j..=bound)
        .take_while(|&i| (i as f64) - (i as f64).powf(beta) <= jf)
        .count() as u64
}

/// Right-hand side of the Poisson approximation bound for the degree of `j`
/// at time `n`.
pub fn poisson_tv_bound(j: u64, n: u64, beta: f64, eps: f64) -> f64 {
    let jf = j as f64;
    let nj = n_j_count(j, beta);
    let jb = jf.powf(beta);
    let mut bound = eps * (1.0 - (1.0 + eps * jf.powf(beta - 1.0)).powf(-beta))
        + eps / jb
        + (eps - 1.0).max(1.0 / jb);
    if nj >= n.saturating_sub(j) {
        bound += ((n.saturating_sub(j)) as f64 / jb - 1.0).abs();
    }
    bound
}

/// Probability that a Poisson(1) Galton-Watson tree has the shape `tree`:
/// `e^{-size} / |Aut(tree)|`.
pub fn poisson_gw_shape_probability(tree: &FringeTree) -> f64 {
    (-(tree.size() as f64)).exp() / tree.automorphisms()
}

/// Every rooted shape with at most `max_size` vertices (`max_size <= 9`).
pub fn shapes_up_to(max_size: usize) -> Vec<FringeTree> {
    assert!(max_size <= 9, "enumeration is factorial in the size");
    let mut shapes = std::collections::BTreeSet::new();
    for size in 1..=max_size {
        // every rooted shape arises from some recursive labelling
        let mut parents = vec![0usize; size - 1];
        'labellings: loop {
            shapes.insert(FringeTree::from_parents(&parents));
            let mut i = parents.len();
            while i > 0 {
                i -= 1;
                if parents[i] < i {
                    parents[i] += 1;
                    parents[i + 1..].iter_mut().for_each(|p| *p = 0);
                    continue 'labellings;
                }
            }
            break;
        }
    }
    shapes.into_iter().collect()
}

/// Exact Poisson(1)-GW law on shapes of size `<= max_size`, remaining mass
/// under `Truncated`.
pub fn poisson_gw_reference(max_size: usize) -> BTreeMap<FringeKey, f64> {
    let mut pmf: BTreeMap<FringeKey, f64> = shapes_up_to(max_size)
        .into_iter()
        .map(|t| {
            let p = poisson_gw_shape_probability(&t);
            (FringeKey::Shape(t.code().to_owned()), p)
        })
        .collect();
    let rest = 1.0 - pmf.values().sum::<f64>();
    pmf.insert(FringeKey::Truncated, rest);
    pmf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_beta_examples() {
        for beta in [0.2, 0.5, 0.8] {
            assert_eq!(f_beta(beta, 0.0).unwrap(), 1.0);
            let end = 2.0 / (1.0 - beta);
            assert!(f_beta(beta, end).unwrap().abs() < 1e-12);
            assert_eq!(f_beta(beta, end + 1.0).unwrap(), 0.0);
            assert!(f_beta(beta, end * (1.0 - 1e-9)).unwrap() < 1e-6);
        }
        assert!((f_beta(0.5, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(f_beta(1.0, 1.0).is_err());
        assert!(f_beta(0.5, -1.0).is_err());
    }

    #[test]
    fn n_j_by_hand() {
        // beta = 1/2, j = 1: i=1 (1-1=0<=1), i=2 (2-1.414=0.59<=1), i=3 (3-1.73=1.27>1)
        assert_eq!(n_j_count(1, 0.5), 2);
        // j = 4: i=4..=6 qualify (6-2.449=3.55), 7-2.646=4.35 > 4
        assert_eq!(n_j_count(4, 0.5), 3);
    }

    #[test]
    fn n_j_lower_bound() {
        for beta in [0.25, 0.5, 0.75] {
            for j in 1..=100_000u64 {
                assert!(n_j_count(j, beta) as f64 >= (j as f64).powf(beta) - 1.0, "j {j} beta {beta}");
            }
        }
    }

    #[test]
    fn n_j_upper_bound_eventually() {
        for beta in [0.25, 0.5, 0.75] {
            let violations: Vec<u64> = (1..=100_000u64)
                .filter(|&j| n_j_count(j, beta) as f64 > 1.2 * (j as f64).powf(beta))
                .collect();
            let j0 = violations.last().map_or(1, |v| v + 1);
            assert!(j0 < 10_000, "beta {beta}: j0 = {j0}");
        }
    }

    #[test]
    fn tv_bound_is_finite_and_shrinks() {
        let small = poisson_tv_bound(100, 1_000_000, 0.5, 1.1);
        let large = poisson_tv_bound(100_000, 1_000_000, 0.5, 1.1);
        assert!(small.is_finite() && large.is_finite());
        assert!(large < small);
    }

    #[test]
    fn shape_counts() {
        // rooted unlabelled trees: 1, 1, 2, 4, 9, 20, 48
        let counts: Vec<usize> = (1..=7)
            .map(|m| shapes_up_to(m).len())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        assert_eq!(shapes_up_to(1).len(), 1);
        assert_eq!(counts, vec![1, 2, 4, 9, 20, 48]);
    }

    #[test]
    fn gw_reference_probabilities() {
        let pmf = poisson_gw_reference(4);
        let e = (-1.0f64).exp();
        assert!((pmf[&FringeKey::Shape("()".into())] - e).abs() < 1e-15);
        assert!((pmf[&FringeKey::Shape("(())".into())] - e * e).abs() < 1e-15);
        // cherry: root with two leaf children, e^-1/2! * e^-2
        assert!((pmf[&FringeKey::Shape("(()())".into())] - e.powi(3) / 2.0).abs() < 1e-15);
        let total: f64 = pmf.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // total progeny law of a critical Poisson GW is Borel(1): P(size = m) = e^-m m^(m-1)/m!
        for m in 1..=6usize {
            let mass: f64 = shapes_up_to(m)
                .iter()
                .filter(|t| t.size() == m)
                .map(poisson_gw_shape_probability)
                .sum();
            let borel = (-(m as f64)).exp() * (m as f64).powi(m as i32 - 1)
                / (1..=m).map(|i| i as f64).product::<f64>();
            assert!((mass - borel).abs() < 1e-14, "m {m}");
        }
    }
}
