//! Limiting degree laws.

use std::collections::BTreeMap;
use std::io::Write;

use statrs::function::factorial::ln_factorial;

use super::constants::c_theta;

/// `P(Poisson(mean) = k)`.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute error `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Limiting fraction of degree-`k` vertices in the macroscopic regime:
/// `P(N(T) = k - 1)` with `N` a rate `1/(1-theta)` Poisson process on
/// `[0, log(1/theta)]` and `T ~ Exp(1)`.
pub fn macro_degree_pmf(theta: f64, k: u64, quad_tol: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let rate = 1.0 / (1.0 - theta);
    let c = c_theta(theta);
    let births = k - 1;
    let integrand = |t: f64| (-t).exp() * poisson_pmf(rate * t, births);
    let body = adaptive_simpson(&integrand, 0.0, c, quad_tol);
    // past c_theta the count is frozen at Poisson(rate * c)
    let tail = (-c).exp() * poisson_pmf(rate * c, births);
    body + tail
}

/// `e^{-1} / (k - 1)!`: the mesoscopic limit, Poisson(1) shifted by one.
pub fn meso_degree_pmf(k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        poisson_pmf(1.0, k - 1)
    }
}

pub fn macro_degree_table(theta: f64, max_k: u64, quad_tol: f64) -> BTreeMap<u64, f64> {
    (1..=max_k).map(|k| (k, macro_degree_pmf(theta, k, quad_tol))).collect()
}

pub fn meso_degree_table(max_k: u64) -> BTreeMap<u64, f64> {
    (1..=max_k).map(|k| (k, meso_degree_pmf(k))).collect()
}

/// `k,probability` rows.
pub fn write_pmf_csv<W: Write>(pmf: &BTreeMap<u64, f64>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,probability")?;
    for (k, p) in pmf {
        writeln!(out, "{k},{}", crate::fmt_f64(*p))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_lr;

    #[test]
    fn half_theta_degree_one_is_five_twelfths() {
        let p = macro_degree_pmf(0.5, 1, 1e-12);
        assert!((p - 5.0 / 12.0).abs() < 1e-11, "{p}");
    }

    /// Closed form: the body integral is r^m / (r+1)^(m+1) * P(m+1, (r+1)c).
    #[test]
    fn matches_incomplete_gamma_closed_form() {
        for theta in [0.1, 0.5, 0.9] {
            let r = 1.0 / (1.0 - theta);
            let c = c_theta(theta);
            for k in 1..30u64 {
                let m = (k - 1) as f64;
                let body = (m * r.ln() - (m + 1.0) * (r + 1.0).ln()).exp() * gamma_lr(m + 1.0, (r + 1.0) * c);
                let expected = body + (-c).exp() * poisson_pmf(r * c, k - 1);
                assert!((macro_degree_pmf(theta, k, 1e-12) - expected).abs() < 1e-10, "theta {theta} k {k}");
            }
        }
    }

    #[test]
    fn normalization_on_grid() {
        for i in 1..=9 {
            let theta = i as f64 / 10.0;
            let total: f64 = macro_degree_table(theta, 200, 1e-10).values().sum();
            assert!((total - 1.0).abs() < 1e-8, "theta {theta}: {total}");
        }
        let total: f64 = meso_degree_table(200).values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_degree_is_two() {
        // mean offspring under the Exp(1) horizon is phi(1) = 1, so mean degree 2
        let mean: f64 = macro_degree_table(0.3, 200, 1e-12).iter().map(|(k, p)| *k as f64 * p).sum();
        assert!((mean - 2.0).abs() < 1e-8);
    }

    #[test]
    fn poisson_basics() {
        assert!((poisson_pmf(1.0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
        assert_eq!(poisson_pmf(0.0, 3), 0.0);
        assert!((meso_degree_pmf(1) - 0.36787944117144233).abs() < 1e-15);
    }
}
