//! Macroscopic height constants, computed along two independent routes.
//!
//! * First-birth route: `phi`, `mu_of` and `kappa`, from the offspring
//!   Laplace transform of the branching process.
//! * Large-deviation route: `lambda_mgf`, `legendre`, `psi` and `alpha_max`,
//!   from the log-moment generating function of `X ~ Uniform[theta, 1]`.
//!
//! The two agree through `alpha_max = 1 / kappa`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `lambda` the inner minimization will probe.
const LAMBDA_CEILING: f64 = 1e12;
const INNER_TOL: f64 = 1e-12;

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("theta", format!("must lie in (0, 1), got {theta}")))
    }
}

/// `c_theta = log(1 / theta)`, the length of the offspring window.
pub fn c_theta(theta: f64) -> f64 {
    -theta.ln()
}

/// `E[-log X]` for `X ~ Uniform[theta, 1]`.
pub fn mu_drift(theta: f64) -> f64 {
    (1.0 - theta + theta * theta.ln()) / (1.0 - theta)
}

/// Laplace transform of the offspring process: `(1 - theta^l) / (l (1 - theta))`.
pub fn phi(theta: f64, lambda: f64) -> f64 {
    -(lambda * theta.ln()).exp_m1() / (lambda * (1.0 - theta))
}

fn ln_phi(theta: f64, lambda: f64) -> f64 {
    (-(lambda * theta.ln()).exp_m1()).ln() - lambda.ln() - (1.0 - theta).ln()
}

/// `inf_{lambda > 1} phi(lambda) e^{lambda a}`.
pub fn mu_of(theta: f64, a: f64) -> Result<f64> {
    check_theta(theta)?;
    if a.is_nan() || a < 0.0 {
        return Err(Error::invalid("a", format!("must be non-negative, got {a}")));
    }
    let objective = |lambda: f64| ln_phi(theta, lambda) + lambda * a;

    // grow the bracket until the objective rises on three consecutive probes
    let mut prev = objective(1.0);
    let mut rises = 0;
    let mut hi = 1.0;
    let mut step = 1.0;
    while rises < 3 {
        hi = 1.0 + step;
        if hi > LAMBDA_CEILING {
            // still decreasing: the infimum is approached as lambda grows
            return Ok(objective(LAMBDA_CEILING).exp());
        }
        let value = objective(hi);
        rises = if value > prev { rises + 1 } else { 0 };
        prev = value;
        step *= 2.0;
    }

    let (mut lo, mut hi) = (1.0f64, hi);
    let mut iterations = 0;
    while hi - lo > INNER_TOL * hi.max(1.0) {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(m1) <= objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        iterations += 1;
        if iterations > 500 {
            return Err(Error::NonConvergence {
                what: "mu_of ternary search",
                iterations,
                lo,
                hi,
            });
        }
    }
    Ok(objective(0.5 * (lo + hi)).exp())
}

/// `kappa(theta) = sup { a : mu(a) < 1 }` by bisection over `[0, c_theta]`.
pub fn kappa(theta: f64, tol: f64) -> Result<f64> {
    check_theta(theta)?;
    let (mut lo, mut hi) = (0.0, c_theta(theta));
    if mu_of(theta, hi)? < 1.0 {
        return Err(Error::Bracketing {
            what: "kappa",
            lo,
            hi,
        });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mu_of(theta, mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NonConvergence {
                what: "kappa bisection",
                iterations,
                lo,
                hi,
            });
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `1/(e^u - 1) - 1/u`, with its Taylor series near 0.
fn bernoulli_gap(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        -0.5 + u / 12.0 - u * u * u / 720.0
    } else {
        1.0 / u.exp_m1() - 1.0 / u
    }
}

/// `log E[X^lambda]`, `X ~ Uniform[theta, 1]`, valid for every real `lambda`.
pub fn lambda_mgf(theta: f64, lambda: f64) -> f64 {
    let c = c_theta(theta);
    let u = (lambda + 1.0) * c;
    let ratio = if u.abs() < 1e-12 { 1.0 } else { -(-u).exp_m1() / u };
    ratio.ln() + (c / (1.0 - theta)).ln()
}

/// Derivative of [`lambda_mgf`] in `lambda`; increases from `log theta` to 0.
pub fn lambda_mgf_derivative(theta: f64, lambda: f64) -> f64 {
    let c = c_theta(theta);
    c * bernoulli_gap((lambda + 1.0) * c)
}

/// Legendre transform `sup_lambda (lambda z - Lambda(lambda))` for
/// `z` in `(log theta, 0)`, via the root of `Lambda'(lambda) = z`.
pub fn legendre(theta: f64, z: f64) -> Result<f64> {
    check_theta(theta)?;
    let lambda = legendre_argmax(theta, z)?;
    Ok(lambda * z - lambda_mgf(theta, lambda))
}

fn legendre_argmax(theta: f64, z: f64) -> Result<f64> {
    let d = |l: f64| lambda_mgf_derivative(theta, l);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while d(lo) > z {
        lo *= 2.0;
        if lo < -1e300 {
            return Err(Error::Bracketing {
                what: "legendre",
                lo,
                hi,
            });
        }
    }
    while d(hi) < z {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracketing {
                what: "legendre",
                lo,
                hi,
            });
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Psi(c) = c Lambda*(-1/c)`.
pub fn psi(theta: f64, c: f64) -> Result<f64> {
    Ok(c * legendre(theta, -1.0 / c)?)
}

/// `inf { c > 1/mu : Psi(c) > 1 }`, bracketed by doubling and then bisected.
pub fn alpha_max(theta: f64, tol: f64) -> Result<f64> {
    check_theta(theta)?;
    let floor = 1.0 / mu_drift(theta);
    let mut lo = floor;
    let mut hi = 2.0 * floor;
    while psi(theta, hi)? <= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Bracketing {
                what: "alpha_max",
                lo: floor,
                hi,
            });
        }
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if psi(theta, mid)? > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NonConvergence {
                what: "alpha_max bisection",
                iterations,
                lo,
                hi,
            });
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightConstants {
    pub theta: f64,
    pub kappa: f64,
    pub alpha_max: f64,
    pub mu_drift: f64,
    pub c_theta: f64,
    pub solver_tolerance: f64,
}

impl HeightConstants {
    pub fn compute(theta: f64, tol: f64) -> Result<Self> {
        Ok(HeightConstants {
            theta,
            kappa: kappa(theta, tol)?,
            alpha_max: alpha_max(theta, tol)?,
            mu_drift: mu_drift(theta),
            c_theta: c_theta(theta),
            solver_tolerance: tol,
        })
    }

    /// `|alpha_max * kappa - 1|`.
    pub fn duality_gap(&self) -> f64 {
        (self.alpha_max * self.kappa - 1.0).abs()
    }
}

/// `theta,kappa,alpha_max,mu_drift,c_theta,duality_gap` rows.
pub fn write_constants_csv<W: Write>(rows: &[HeightConstants], mut out: W) -> std::io::Result<()> {
    writeln!(out, "theta,kappa,alpha_max,mu_drift,c_theta,duality_gap")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            crate::fmt_f64(r.theta),
            crate::fmt_f64(r.kappa),
            crate::fmt_f64(r.alpha_max),
            crate::fmt_f64(r.mu_drift),
            crate::fmt_f64(r.c_theta),
            crate::fmt_f64(r.duality_gap())
        )?;
    }
    out.flush()
}
