//! Goodness-of-fit statistics and sample summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Kolmogorov-Smirnov statistic `sup_x |F_m(x) - F(x)|` of `sample` against `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// DKW radius: `P(sup |F_m - F| > eps) <= alpha`.
pub fn dkw_epsilon(m: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

/// Total variation between a histogram and a reference pmf. Histogram keys
/// missing from `pmf` go to a remainder bucket with reference mass `1 - sum(pmf)`.
pub fn tv_distance<K: Ord>(hist: &BTreeMap<K, u64>, pmf: &BTreeMap<K, f64>) -> Result<f64> {
    let total: u64 = hist.values().sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    let total = total as f64;
    let mut l1 = 0.0;
    let mut covered = 0.0;
    for (k, &q) in pmf {
        let p = hist.get(k).copied().unwrap_or(0) as f64 / total;
        covered += p;
        l1 += (p - q).abs();
    }
    let rest_q = (1.0 - pmf.values().sum::<f64>()).max(0.0);
    l1 += ((1.0 - covered).max(0.0) - rest_q).abs();
    Ok((0.5 * l1).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of `hist` against `pmf`. Cells with expected count
/// below 5, and the remainder, are pooled into one tail cell.
pub fn chi_square<K: Ord>(hist: &BTreeMap<K, u64>, pmf: &BTreeMap<K, f64>) -> Result<ChiSquare> {
    let total: u64 = hist.values().sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    let mut seen = 0.0;
    for (k, &q) in pmf {
        let obs = hist.get(k).copied().unwrap_or(0) as f64;
        seen += obs;
        let exp = n * q;
        if exp >= 5.0 {
            cells.push((obs, exp));
        } else {
            pooled_obs += obs;
            pooled_exp += exp;
        }
    }
    pooled_obs += n - seen;
    pooled_exp += n * (1.0 - pmf.values().sum::<f64>()).max(0.0);
    if pooled_exp >= 5.0 || cells.is_empty() {
        cells.push((pooled_obs, pooled_exp));
    } else if let Some(last) = cells.last_mut() {
        last.0 += pooled_obs;
        last.1 += pooled_exp;
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if statistic.is_finite() {
        ChiSquared::new(dof as f64).expect("dof >= 1").sf(statistic)
    } else {
        0.0
    };
    Ok(ChiSquare { statistic, dof, p_value })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub pass: bool,
    /// First integer where the empirical CDF falls below `reference - slack`.
    pub witness: Option<u64>,
    /// `max_x (reference(x) - empirical(x))`.
    pub max_deficit: f64,
}

/// Checks that `sample` is stochastically smaller than the reference, i.e.
/// `F_m(x) >= F(x) - slack` at every integer up to the sample maximum.
pub fn cdf_dominance(sample: &[u64], reference: impl Fn(u64) -> f64, slack: f64) -> Result<Dominance> {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in sample {
        *counts.entry(s).or_insert(0) += 1;
    }
    cdf_dominance_counts(&counts, reference, slack)
}

/// [`cdf_dominance`] for a sample given as value counts.
pub fn cdf_dominance_counts(
    counts: &BTreeMap<u64, u64>,
    reference: impl Fn(u64) -> f64,
    slack: f64,
) -> Result<Dominance> {
    if slack < 0.0 {
        return Err(Error::invalid("slack", "must be non-negative"));
    }
    let m: u64 = counts.values().sum();
    if m == 0 {
        return Err(Error::EmptySample);
    }
    let m = m as f64;
    let max = *counts.keys().next_back().expect("non-empty");
    let mut below = 0u64;
    let mut witness = None;
    let mut max_deficit = f64::NEG_INFINITY;
    let mut iter = counts.iter().peekable();
    for x in 0..=max {
        while let Some(&(&k, &c)) = iter.peek() {
            if k > x {
                break;
            }
            below += c;
            iter.next();
        }
        let deficit = reference(x) - below as f64 / m;
        max_deficit = max_deficit.max(deficit);
        if witness.is_none() && deficit > slack {
            witness = Some(x);
        }
    }
    Ok(Dominance {
        pass: witness.is_none(),
        witness,
        max_deficit,
    })
}

/// CDF of `G + 1` where `P(G > k) = (1 - p)^k`, `k >= 0`.
pub fn shifted_geometric_cdf(p: f64) -> impl Fn(u64) -> f64 {
    move |x| {
        if x == 0 {
            0.0
        } else {
            1.0 - (1.0 - p).powf((x - 1) as f64)
        }
    }
}

/// Mean, unbiased variance and the 5/25/50/75/95% quantiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub quantiles: BTreeMap<String, f64>,
}

pub const SUMMARY_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantiles = SUMMARY_LEVELS
            .iter()
            .map(|&q| (format!("q{:02}", (q * 100.0).round() as u32), quantile_sorted(&sorted, q)))
            .collect();
        Ok(Summary { count, mean, variance, quantiles })
    }

    pub fn standard_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::branchpoint_sample;
    use crate::rng::{stream, unit_f64};

    #[test]
    fn ks_examples() {
        let m = 50;
        let exact: Vec<f64> = (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect();
        let d = ks_one_sample(&exact, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / m as f64).abs() < 1e-12);
        let d = ks_one_sample(&[2.0; 7], |x| if x < 2.0 { 0.0 } else { 0.5 }).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        assert!(matches!(ks_one_sample(&[], |x| x), Err(Error::EmptySample)));
    }

    #[test]
    fn ks_branchpoint_sampler_calibration() {
        let draws: Vec<f64> = (0..10_000).map(|s| branchpoint_sample(2, s).unwrap()[0]).collect();
        assert!(ks_one_sample(&draws, |x| x.clamp(0.0, 1.0).powi(8)).unwrap() <= 0.03);
    }

    #[test]
    fn ks_exceeds_dkw_rarely() {
        // calibration: at alpha = 0.05 the DKW radius is crossed in at most ~5% of runs
        let (m, runs, alpha) = (200, 400, 0.05);
        let eps = dkw_epsilon(m, alpha);
        let mut rng = stream(5);
        let exceed = (0..runs)
            .filter(|_| {
                let xs: Vec<f64> = (0..m).map(|_| unit_f64(&mut rng)).collect();
                ks_one_sample(&xs, |x| x).unwrap() > eps
            })
            .count();
        // binomial(400, 0.05) exceeds 35 with probability < 1e-3
        assert!(exceed <= 35, "{exceed}");
    }

    #[test]
    fn tv_examples() {
        let hist: BTreeMap<u64, u64> = [(1, 3), (2, 1)].into();
        let same: BTreeMap<u64, f64> = [(1, 0.75), (2, 0.25)].into();
        assert_eq!(tv_distance(&hist, &same).unwrap(), 0.0);
        let disjoint: BTreeMap<u64, f64> = [(5, 0.5), (6, 0.5)].into();
        assert!((tv_distance(&hist, &disjoint).unwrap() - 1.0).abs() < 1e-12);
        // mass outside pmf keys is compared with the remainder bucket
        let partial: BTreeMap<u64, f64> = [(1, 0.75)].into();
        assert!(tv_distance(&hist, &partial).unwrap().abs() < 1e-12);
        assert!(tv_distance(&BTreeMap::<u64, u64>::new(), &same).is_err());
    }

    #[test]
    fn chi_square_pooling() {
        let pmf: BTreeMap<u64, f64> = [(0, 0.5), (1, 0.3), (2, 0.15), (3, 0.05)].into();
        let hist: BTreeMap<u64, u64> = [(0, 50), (1, 30), (2, 15), (3, 5)].into();
        let c = chi_square(&hist, &pmf).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.dof, 3);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        // with 40 draws the last two cells have expected 6 and 2; 2 is pooled with the empty remainder, then merged
        let small: BTreeMap<u64, u64> = [(0, 20), (1, 12), (2, 6), (3, 2)].into();
        assert_eq!(chi_square(&small, &pmf).unwrap().dof, 2);
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let pmf: BTreeMap<u64, f64> = [(0, 0.5), (1, 0.5)].into();
        let hist: BTreeMap<u64, u64> = [(0, 700), (1, 300)].into();
        assert!(chi_square(&hist, &pmf).unwrap().p_value < 1e-10);
    }

    #[test]
    fn dominance_examples() {
        let geo = shifted_geometric_cdf(0.1);
        assert!(cdf_dominance(&[0; 10], &geo, 0.0).unwrap().pass);
        let big = cdf_dominance(&[100; 10], &geo, 0.0).unwrap();
        assert!(!big.pass);
        assert_eq!(big.witness, Some(2));
        assert!(cdf_dominance(&[1], &geo, -1.0).is_err());
    }

    #[test]
    fn dominance_of_reference_draws() {
        let p = 0.05;
        let m = 5000;
        let slack = 3.0 * dkw_epsilon(m, 0.001);
        let geo = shifted_geometric_cdf(p);
        let failures = (0..50)
            .filter(|&s| {
                let mut rng = stream(1000 + s);
                let draws: Vec<u64> = (0..m)
                    .map(|_| {
                        // inversion: G = ceil(log U / log(1-p)) has P(G > k) = (1-p)^k
                        let u = crate::rng::open_unit_f64(&mut rng);
                        (u.ln() / (1.0 - p).ln()).ceil() as u64 + 1
                    })
                    .collect();
                !cdf_dominance(&draws, &geo, slack).unwrap().pass
            })
            .count();
        assert_eq!(failures, 0);
    }

    #[test]
    fn summary_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.quantiles["q50"], 2.5);
        assert!((s.quantiles["q05"] - 1.15).abs() < 1e-12);
        assert_eq!(Summary::of(&[7.0]).unwrap().variance, 0.0);
        assert!(Summary::of(&[]).is_err());
    }
}
