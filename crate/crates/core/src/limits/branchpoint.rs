//! Heights of the branchpoints of the subtree spanned by the `k` youngest
//! vertices at the critical memory exponent, on the scale where the leaves
//! sit at height 1.

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng::{self, open_unit_f64};

/// Exponents `1/(4 l (l - 1))` for `l = k` down to `2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchpointLaw {
    pub k: usize,
    pub exponents: Vec<f64>,
}

impl BranchpointLaw {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("k", "need at least two leaves"));
        }
        Ok(BranchpointLaw {
            k,
            exponents: (2..=k).rev().map(|l| 1.0 / rate(l)).collect(),
        })
    }

    /// `X_1 < ... < X_{k-1}`: `X_{k-1} = U^{1/(4k(k-1))}`, then
    /// `X_{l-1} = X_l U^{1/(4l(l-1))}` going down.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> Vec<f64> {
        let mut xs = vec![0.0; self.k - 1];
        let mut x = 1.0;
        for (i, e) in self.exponents.iter().enumerate() {
            x *= open_unit_f64(rng).powf(*e);
            xs[self.k - 2 - i] = x;
        }
        xs
    }

    /// `P(X_l <= x)`. `-log X_l` is a sum of independent exponentials with
    /// rates `4m(m-1)`, `m = l+1..=k`, so this is a hypoexponential tail.
    pub fn cdf(&self, l: usize, x: f64) -> Result<f64> {
        if l == 0 || l >= self.k {
            return Err(Error::invalid("l", format!("must lie in 1..{}", self.k)));
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x >= 1.0 {
            return Ok(1.0);
        }
        let s = -x.ln();
        let rates: Vec<f64> = (l + 1..=self.k).map(rate).collect();
        let survival: f64 = rates
            .iter()
            .enumerate()
            .map(|(i, &ai)| {
                let weight: f64 = rates
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &aj)| aj / (aj - ai))
                    .product();
                weight * (-ai * s).exp()
            })
            .sum();
        Ok(survival.clamp(0.0, 1.0))
    }
}

fn rate(l: usize) -> f64 {
    4.0 * (l * (l - 1)) as f64
}

pub fn branchpoint_sample(k: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(BranchpointLaw::new(k)?.sample(&mut rng::stream(seed)))
}

pub fn branchpoint_cdf(k: usize, l: usize, x: f64) -> Result<f64> {
    BranchpointLaw::new(k)?.cdf(l, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_increase_as_l_decreases() {
        let law = BranchpointLaw::new(5).unwrap();
        assert_eq!(law.exponents.len(), 4);
        assert!((law.exponents[0] - 1.0 / 80.0).abs() < 1e-15);
        assert!(law.exponents.windows(2).all(|w| w[0] < w[1] && w[0] > 0.0));
    }

    #[test]
    fn top_branchpoint_cdf_is_power() {
        for k in 2..6 {
            for x in [0.1f64, 0.5, 0.9, 0.99] {
                let expected = x.powf((4 * k * (k - 1)) as f64);
                assert!((branchpoint_cdf(k, k - 1, x).unwrap() - expected).abs() < 1e-14);
            }
        }
        // median of X_1 for k = 2 solves x^8 = 1/2
        let median = 0.5f64.powf(1.0 / 8.0);
        assert!((median - 0.917_004).abs() < 1e-6);
        assert!((branchpoint_cdf(2, 1, median).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn samples_are_increasing_and_bounded() {
        for seed in 0..1000 {
            let xs = branchpoint_sample(5, seed).unwrap();
            assert_eq!(xs.len(), 4);
            assert!(xs.windows(2).all(|w| w[0] <= w[1]));
            assert!(xs.iter().all(|&x| x > 0.0 && x <= 1.0));
        }
    }

    #[test]
    fn lower_branchpoint_cdf_matches_monte_carlo() {
        // X_1 for k = 3 is a product of two powers of uniforms
        let law = BranchpointLaw::new(3).unwrap();
        let mut rng = rng::stream(77);
        let m = 200_000;
        let draws: Vec<f64> = (0..m).map(|_| law.sample(&mut rng)[0]).collect();
        for x in [0.6, 0.75, 0.85, 0.95] {
            let emp = draws.iter().filter(|&&d| d <= x).count() as f64 / m as f64;
            let cdf = law.cdf(1, x).unwrap();
            assert!((emp - cdf).abs() < 0.005, "x {x}: {emp} vs {cdf}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(BranchpointLaw::new(1).is_err());
        assert!(branchpoint_cdf(3, 3, 0.5).is_err());
        assert!(branchpoint_cdf(3, 0, 0.5).is_err());
    }
}
