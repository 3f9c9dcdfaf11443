//! Samplers for the limiting fringe laws.
//!
//! The branching-process samplers run a continuous-time genealogy from a
//! single ancestor up to an independent `Exp(1)` horizon and return the
//! resulting family tree in canonical form.

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::fringe::{FringeOutcome, FringeTree};
use crate::rng::{self, exponential, unit_f64};

use super::constants::c_theta;

/// Grows a genealogy up to `horizon`. `births(rng, window, out)` must push the
/// birth ages in `[0, window)` of one individual's children.
fn genealogy<R, F>(rng: &mut R, horizon: f64, size_cap: usize, mut births: F) -> Result<FringeOutcome>
where
    R: RngCore,
    F: FnMut(&mut R, f64, &mut Vec<f64>) -> Result<()>,
{
    let mut birth_time = vec![0.0f64];
    let mut parent: Vec<usize> = Vec::new();
    let mut ages = Vec::new();
    let mut head = 0;
    while head < birth_time.len() {
        let born = birth_time[head];
        ages.clear();
        births(rng, horizon - born, &mut ages)?;
        for &age in &ages {
            if birth_time.len() >= size_cap {
                return Ok(FringeOutcome::Truncated);
            }
            birth_time.push(born + age);
            parent.push(head);
        }
        head += 1;
    }
    Ok(FringeOutcome::Tree(FringeTree::from_parents(&parent)))
}

/// Macroscopic fringe with a given horizon.
pub fn macro_fringe_with_horizon<R: RngCore>(
    rng: &mut R,
    theta: f64,
    horizon: f64,
    size_cap: usize,
) -> Result<FringeOutcome> {
    let rate = 1.0 / (1.0 - theta);
    let lifetime = c_theta(theta);
    genealogy(rng, horizon, size_cap, |rng, window, out| {
        let end = window.min(lifetime);
        let mut t = exponential(rng, rate);
        while t < end {
            out.push(t);
            t += exponential(rng, rate);
        }
        Ok(())
    })
}

/// One draw from the macroscopic fringe law: offspring at rate `1/(1-theta)`
/// on ages `[0, log(1/theta)]`, stopped at an `Exp(1)` horizon.
pub fn sample_macro_fringe(theta: f64, seed: u64, size_cap: usize) -> Result<FringeOutcome> {
    check(theta, size_cap)?;
    let mut rng = rng::stream(seed);
    let horizon = exponential(&mut rng, 1.0);
    macro_fringe_with_horizon(&mut rng, theta, horizon, size_cap)
}

/// SARRT fringe with a given horizon; offspring intensity `density(e^{-age})`
/// sampled by thinning a rate-`envelope` Poisson process.
pub fn sarrt_fringe_with_horizon<R: RngCore>(
    rng: &mut R,
    density: &dyn Fn(f64) -> f64,
    envelope: f64,
    horizon: f64,
    size_cap: usize,
) -> Result<FringeOutcome> {
    genealogy(rng, horizon, size_cap, |rng, window, out| {
        let mut t = exponential(rng, envelope);
        while t < window {
            let intensity = density((-t).exp());
            if intensity > envelope * (1.0 + 1e-12) {
                return Err(Error::EnvelopeViolation {
                    age: t,
                    intensity,
                    envelope,
                });
            }
            if unit_f64(rng) * envelope < intensity {
                out.push(t);
            }
            t += exponential(rng, envelope);
        }
        Ok(())
    })
}

/// One draw from the SARRT fringe law for attachment density `density` on `[0, 1]`.
pub fn sample_sarrt_fringe(
    density: &dyn Fn(f64) -> f64,
    envelope: f64,
    seed: u64,
    size_cap: usize,
) -> Result<FringeOutcome> {
    if !(envelope > 0.0 && envelope.is_finite()) {
        return Err(Error::invalid("envelope", format!("must be positive, got {envelope}")));
    }
    check_cap(size_cap)?;
    let mut rng = rng::stream(seed);
    let horizon = exponential(&mut rng, 1.0);
    sarrt_fringe_with_horizon(&mut rng, density, envelope, horizon, size_cap)
}

/// Poisson(1) by inversion.
fn poisson_one<R: RngCore>(rng: &mut R) -> u64 {
    let u = unit_f64(rng);
    let mut p = (-1.0f64).exp();
    let mut cdf = p;
    let mut k = 0;
    while u >= cdf && k < 64 {
        k += 1;
        p /= k as f64;
        cdf += p;
    }
    k
}

/// One critical Poisson(1) Galton-Watson tree, grown breadth first.
pub fn sample_poisson_gw(seed: u64, size_cap: usize) -> Result<FringeOutcome> {
    check_cap(size_cap)?;
    let mut rng = rng::stream(seed);
    let mut parent: Vec<usize> = Vec::new();
    let mut head = 0;
    let mut size = 1;
    while head < size {
        for _ in 0..poisson_one(&mut rng) {
            if size >= size_cap {
                return Ok(FringeOutcome::Truncated);
            }
            parent.push(head);
            size += 1;
        }
        head += 1;
    }
    Ok(FringeOutcome::Tree(FringeTree::from_parents(&parent)))
}

fn check(theta: f64, size_cap: usize) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid("theta", format!("must lie in (0, 1), got {theta}")));
    }
    check_cap(size_cap)
}

fn check_cap(size_cap: usize) -> Result<()> {
    if size_cap == 0 {
        Err(Error::invalid("size_cap", "must be at least 1"))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::degree::macro_degree_pmf;

    fn is_leaf(o: &FringeOutcome) -> bool {
        o.tree().is_some_and(|t| t.size() == 1)
    }

    #[test]
    fn zero_horizon_gives_single_vertex() {
        let mut rng = rng::stream(0);
        for theta in [0.01, 0.5] {
            assert!(is_leaf(&macro_fringe_with_horizon(&mut rng, theta, 0.0, 10).unwrap()));
        }
        let uniform = |_: f64| 1.0;
        assert!(is_leaf(&sarrt_fringe_with_horizon(&mut rng, &uniform, 1.0, 0.0, 10).unwrap()));
    }

    #[test]
    fn macro_leaf_probability_matches_quadrature() {
        let m = 200_000;
        let leaves = (0..m).filter(|&s| is_leaf(&sample_macro_fringe(0.5, s, 50).unwrap())).count();
        let expected = macro_degree_pmf(0.5, 1, 1e-12);
        let se = (expected * (1.0 - expected) / m as f64).sqrt();
        assert!((leaves as f64 / m as f64 - expected).abs() < 4.0 * se);
    }

    #[test]
    fn macro_root_offspring_mean_at_fixed_horizon() {
        // root offspring are Poisson with mean min(h, log(1/theta)) / (1 - theta)
        let m = 100_000u64;
        let theta = 0.4;
        for h in [0.3f64, 2.0] {
            let mut rng = crate::rng::stream(h.to_bits());
            let total: usize = (0..m)
                .map(|_| match macro_fringe_with_horizon(&mut rng, theta, h, 1_000_000).unwrap() {
                    FringeOutcome::Tree(t) => t.root_degree(),
                    FringeOutcome::Truncated => unreachable!(),
                })
                .sum();
            let expected = f64::min(h, c_theta(theta)) / (1.0 - theta);
            let se = (expected / m as f64).sqrt();
            let mean = total as f64 / m as f64;
            assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected}");
        }
    }

    #[test]
    fn gw_leaf_and_chain_probabilities() {
        let m = 200_000;
        let samples: Vec<FringeOutcome> = (0..m).map(|s| sample_poisson_gw(s, 100).unwrap()).collect();
        let freq = |code: &str| {
            samples.iter().filter(|o| o.tree().is_some_and(|t| t.code() == code)).count() as f64 / m as f64
        };
        let e1 = (-1.0f64).exp();
        let se = (e1 * (1.0 - e1) / m as f64).sqrt();
        assert!((freq("()") - e1).abs() < 4.0 * se);
        let e2 = (-2.0f64).exp();
        assert!((freq("(())") - e2).abs() < 4.0 * (e2 / m as f64).sqrt());
    }

    #[test]
    fn uniform_sarrt_root_degree_is_geometric() {
        // with intensity 1 and an Exp(1) horizon, root births race the horizon:
        // P(k births) = 2^-(k+1)
        let uniform = |v: f64| if (0.0..=1.0).contains(&v) { 1.0 } else { 0.0 };
        let m = 100_000u64;
        let mut counts = [0u64; 4];
        for s in 0..m {
            let o = sample_sarrt_fringe(&uniform, 1.0, s, 100_000).unwrap();
            let d = o.tree().map(|t| t.root_degree()).unwrap_or(99);
            if d < 4 {
                counts[d] += 1;
            }
        }
        // independent oracle: race two unit exponential clocks directly
        let mut rng = rng::stream(12345);
        let mut race = [0u64; 4];
        for _ in 0..m {
            let horizon = exponential(&mut rng, 1.0);
            let mut births = 0;
            let mut t = exponential(&mut rng, 1.0);
            while t < horizon {
                births += 1;
                t += exponential(&mut rng, 1.0);
            }
            if births < 4 {
                race[births] += 1;
            }
        }
        for k in 0..4 {
            let p = 0.5f64.powi(k as i32 + 1);
            let se = (p * (1.0 - p) / m as f64).sqrt();
            assert!((counts[k] as f64 / m as f64 - p).abs() < 4.0 * se, "k {k}");
            assert!((race[k] as f64 / m as f64 - p).abs() < 4.0 * se, "race k {k}");
        }
    }

    #[test]
    fn envelope_violation_is_reported() {
        let steep = |_: f64| 5.0;
        let mut rng = rng::stream(1);
        let err = sarrt_fringe_with_horizon(&mut rng, &steep, 1.0, 10.0, 100).unwrap_err();
        assert!(matches!(err, Error::EnvelopeViolation { .. }));
    }

    #[test]
    fn truncation_at_cap() {
        let truncated = (0..2000).filter(|&s| sample_poisson_gw(s, 1).unwrap() == FringeOutcome::Truncated).count();
        // cap 1 truncates exactly the trees with at least one child
        let p = 1.0 - (-1.0f64).exp();
        assert!((truncated as f64 / 2000.0 - p).abs() < 0.05);
    }
}
