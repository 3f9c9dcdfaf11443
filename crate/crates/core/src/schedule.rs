//! Attachment rules: which existing vertices an arriving vertex may attach to.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type LabelMap = Arc<dyn Fn(u64) -> u64 + Send + Sync>;
type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Rule selecting the parent of each arriving vertex.
///
/// Windowed variants attach vertex `n + 1` uniformly to `{max(1, j(n)), ..., n}`.
/// `Sarrt` attaches vertex `n + 1` to `max(1, floor(n * V))` with `V` drawn
/// from an [`AttachmentLaw`].
#[derive(Clone)]
pub enum MemorySchedule {
    Macroscopic { theta: f64 },
    Mesoscopic { beta: f64 },
    Sarrt(AttachmentLaw),
    CustomJ(CustomJ),
}

impl MemorySchedule {
    pub fn macroscopic(theta: f64) -> Result<Self> {
        check_open_unit("theta", theta)?;
        Ok(MemorySchedule::Macroscopic { theta })
    }

    pub fn mesoscopic(beta: f64) -> Result<Self> {
        check_open_unit("beta", beta)?;
        Ok(MemorySchedule::Mesoscopic { beta })
    }

    pub fn sarrt(law: AttachmentLaw) -> Self {
        MemorySchedule::Sarrt(law)
    }

    pub fn custom_j(j: CustomJ) -> Self {
        MemorySchedule::CustomJ(j)
    }

    /// Re-checks parameter ranges (schedules built from enum literals skip the constructors).
    pub fn validate(&self) -> Result<()> {
        match self {
            MemorySchedule::Macroscopic { theta } => check_open_unit("theta", *theta),
            MemorySchedule::Mesoscopic { beta } => check_open_unit("beta", *beta),
            MemorySchedule::Sarrt(_) | MemorySchedule::CustomJ(_) => Ok(()),
        }
    }

    /// The raw memory function `j(n)`; `None` for SARRT.
    pub fn j(&self, n: u64) -> Option<u64> {
        match self {
            MemorySchedule::Macroscopic { theta } => Some(floor_mul(*theta, n)),
            MemorySchedule::Mesoscopic { beta } => Some(n - floor_pow(n, *beta)),
            MemorySchedule::CustomJ(custom) => Some((custom.j)(n)),
            MemorySchedule::Sarrt(_) => None,
        }
    }

    /// Smallest eligible label when vertex `n + 1` arrives, or `None` for SARRT.
    #[inline]
    pub fn window_lo(&self, n: u64) -> Option<u64> {
        self.j(n).map(|j| j.clamp(1, n.max(1)))
    }

    pub fn is_windowed(&self) -> bool {
        !matches!(self, MemorySchedule::Sarrt(_))
    }

    pub fn spec(&self) -> ScheduleSpec {
        match self {
            MemorySchedule::Macroscopic { theta } => ScheduleSpec::Macroscopic { theta: *theta },
            MemorySchedule::Mesoscopic { beta } => ScheduleSpec::Mesoscopic { beta: *beta },
            MemorySchedule::Sarrt(law) => ScheduleSpec::Sarrt {
                law: law.spec.clone(),
            },
            MemorySchedule::CustomJ(custom) => ScheduleSpec::CustomJ {
                name: custom.name.clone(),
            },
        }
    }
}

impl fmt::Debug for MemorySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.spec())
    }
}

/// The attachment window `(lo, hi)` available to vertex `n + 1`: `hi = n`,
/// `lo = max(1, j(n))`.
pub fn window(schedule: &MemorySchedule, n: u64) -> Result<(u64, u64)> {
    if n == 0 {
        return Err(Error::invalid("n", "window is defined for n >= 1"));
    }
    let lo = schedule.window_lo(n).ok_or(Error::WindowlessSchedule)?;
    Ok((lo, n))
}

/// User-supplied memory function.
#[derive(Clone)]
pub struct CustomJ {
    name: String,
    j: LabelMap,
}

impl CustomJ {
    pub fn new(name: impl Into<String>, j: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        CustomJ {
            name: name.into(),
            j: Arc::new(j),
        }
    }

    /// `j(n) = table[n - 1]`; past the end of the table the window size is held fixed.
    pub fn from_table(name: impl Into<String>, table: Vec<u64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::invalid("j table", "empty"));
        }
        let last = table.len() as u64;
        let lag = last - table[table.len() - 1].min(last);
        let table: Arc<[u64]> = table.into();
        let custom = CustomJ::new(name, move |n| match table.get((n as usize).wrapping_sub(1)) {
            Some(&j) => j,
            None => n.saturating_sub(lag),
        });
        custom.validate(last)?;
        Ok(custom)
    }

    /// Constant `j`, e.g. `j = 1` yields the uniform random recursive tree.
    pub fn constant(value: u64) -> Self {
        CustomJ::new(format!("const:{value}"), move |_| value)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Checks `1 <= j(n) <= n` and monotonicity for `n = 1..=upto`.
    pub fn validate(&self, upto: u64) -> Result<()> {
        let mut prev = 0;
        for n in 1..=upto {
            let j = (self.j)(n);
            if j > n {
                return Err(Error::invalid("j", format!("j({n}) = {j} exceeds {n}")));
            }
            if j < prev {
                return Err(Error::invalid("j", format!("j decreases at n = {n}")));
            }
            prev = j;
        }
        Ok(())
    }
}

/// Law of the attachment variable `V` of a SARRT.
#[derive(Clone)]
pub struct AttachmentLaw {
    spec: AttachmentSpec,
    quantile: RealMap,
    density: RealMap,
    density_sup: f64,
}

impl AttachmentLaw {
    /// `V ~ Uniform[lo, hi]`; `lo = theta, hi = 1` mirrors the macroscopic regime.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
            return Err(Error::invalid(
                "uniform law",
                format!("need 0 <= lo < hi <= 1, got [{lo}, {hi}]"),
            ));
        }
        let width = hi - lo;
        Ok(AttachmentLaw {
            spec: AttachmentSpec::Uniform { lo, hi },
            quantile: Arc::new(move |u| lo + width * u),
            density: Arc::new(move |v| if (lo..=hi).contains(&v) { 1.0 / width } else { 0.0 }),
            density_sup: 1.0 / width,
        })
    }

    /// Density `gamma * v^(gamma - 1)` on `[0, 1]`, `gamma >= 1`.
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::invalid("power law", format!("need gamma >= 1, got {gamma}")));
        }
        Ok(AttachmentLaw {
            spec: AttachmentSpec::Power { gamma },
            quantile: Arc::new(move |u: f64| u.powf(1.0 / gamma)),
            density: Arc::new(move |v: f64| {
                if (0.0..=1.0).contains(&v) {
                    gamma * v.powf(gamma - 1.0)
                } else {
                    0.0
                }
            }),
            density_sup: gamma,
        })
    }

    /// Arbitrary law from its quantile function, density and an upper bound on the density.
    pub fn custom(
        name: impl Into<String>,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density_sup: f64,
    ) -> Self {
        AttachmentLaw {
            spec: AttachmentSpec::Custom { name: name.into() },
            quantile: Arc::new(quantile),
            density: Arc::new(density),
            density_sup,
        }
    }

    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        (self.quantile)(u)
    }

    #[inline]
    pub fn density(&self, v: f64) -> f64 {
        (self.density)(v)
    }

    pub fn density_sup(&self) -> f64 {
        self.density_sup
    }

    pub fn spec(&self) -> &AttachmentSpec {
        &self.spec
    }

    /// Scans the quantile map on a grid for range and monotonicity.
    pub fn validate(&self, grid: usize) -> Result<()> {
        let q0 = self.quantile(0.0);
        let q1 = self.quantile(1.0);
        if q0 < 0.0 || q1 > 1.0 {
            return Err(Error::invalid("quantile", format!("range [{q0}, {q1}] leaves [0, 1]")));
        }
        let mut prev = q0;
        for i in 1..=grid {
            let q = self.quantile(i as f64 / grid as f64);
            if q < prev {
                return Err(Error::invalid("quantile", "not monotone"));
            }
            prev = q;
        }
        Ok(())
    }
}

/// Serializable description of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Macroscopic { theta: f64 },
    Mesoscopic { beta: f64 },
    Sarrt { law: AttachmentSpec },
    CustomJ { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AttachmentSpec {
    Uniform { lo: f64, hi: f64 },
    Power { gamma: f64 },
    Custom { name: String },
}

impl ScheduleSpec {
    /// Builds the schedule; custom-j and custom laws cannot be rebuilt from a name alone.
    pub fn build(&self) -> Result<MemorySchedule> {
        match self {
            ScheduleSpec::Macroscopic { theta } => MemorySchedule::macroscopic(*theta),
            ScheduleSpec::Mesoscopic { beta } => MemorySchedule::mesoscopic(*beta),
            ScheduleSpec::Sarrt { law } => Ok(MemorySchedule::Sarrt(law.build()?)),
            ScheduleSpec::CustomJ { name } => parse_builtin_custom_j(name)
                .ok_or_else(|| Error::invalid("custom_j", format!("cannot rebuild `{name}`"))),
        }
    }
}

impl AttachmentSpec {
    pub fn build(&self) -> Result<AttachmentLaw> {
        match self {
            AttachmentSpec::Uniform { lo, hi } => AttachmentLaw::uniform(*lo, *hi),
            AttachmentSpec::Power { gamma } => AttachmentLaw::power(*gamma),
            AttachmentSpec::Custom { name } => Err(Error::invalid(
                "attachment law",
                format!("cannot rebuild custom law `{name}`"),
            )),
        }
    }
}

fn parse_builtin_custom_j(name: &str) -> Option<MemorySchedule> {
    let value = name.strip_prefix("const:")?.parse().ok()?;
    Some(MemorySchedule::CustomJ(CustomJ::constant(value)))
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Macroscopic { theta } => write!(f, "macroscopic(theta={theta})"),
            ScheduleSpec::Mesoscopic { beta } => write!(f, "mesoscopic(beta={beta})"),
            ScheduleSpec::Sarrt { law } => match law {
                AttachmentSpec::Uniform { lo, hi } => write!(f, "sarrt(uniform[{lo},{hi}])"),
                AttachmentSpec::Power { gamma } => write!(f, "sarrt(power({gamma}))"),
                AttachmentSpec::Custom { name } => write!(f, "sarrt({name})"),
            },
            ScheduleSpec::CustomJ { name } => write!(f, "custom_j({name})"),
        }
    }
}

fn check_open_unit(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in (0, 1), got {x}")))
    }
}

/// Exact `floor(x * n)` for the binary value of `x` in `[0, 1)`.
pub fn floor_mul(x: f64, n: u64) -> u64 {
    debug_assert!((0.0..1.0).contains(&x));
    if x == 0.0 {
        return 0;
    }
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let (mantissa, exp) = if exp_bits == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), exp_bits - 1075)
    };
    // x = mantissa * 2^exp with exp < 0 since x < 1.
    let shift = (-exp) as u32;
    if shift >= 128 {
        return 0;
    }
    ((mantissa as u128 * n as u128) >> shift) as u64
}

/// Exact `floor(n^beta)` for `beta` in `(0, 1)`.
///
/// The floating-point estimate is corrected by an exact integer comparison
/// whenever `beta = p / 2^k` with small `k` (0.5, 0.75, ...), where `n^beta`
/// can be an exact integer; otherwise a log comparison decides.
pub fn floor_pow(n: u64, beta: f64) -> u64 {
    if n <= 1 {
        return n;
    }
    let mut m = (n as f64).powf(beta).floor() as u64;
    while pow_at_most(m + 1, n, beta) {
        m += 1;
    }
    while m > 0 && !pow_at_most(m, n, beta) {
        m -= 1;
    }
    m
}

/// Whether `m <= n^beta`.
fn pow_at_most(m: u64, n: u64, beta: f64) -> bool {
    if m <= 1 {
        return true;
    }
    if let Some((p, k)) = dyadic(beta, 16) {
        // m <= n^(p/2^k)  <=>  m^(2^k) <= n^p
        let lhs = checked_pow(m as u128, 1u32 << k);
        let rhs = checked_pow(n as u128, p as u32);
        if let (Some(lhs), Some(rhs)) = (lhs, rhs) {
            return lhs <= rhs;
        }
    }
    (m as f64).ln() <= beta * (n as f64).ln()
}

/// `beta = p / 2^k` with `k <= max_k`, if such a representation exists.
fn dyadic(beta: f64, max_k: u32) -> Option<(u64, u32)> {
    (0..=max_k).find_map(|k| {
        let scaled = beta * (1u64 << k) as f64;
        (scaled.fract() == 0.0).then_some((scaled as u64, k))
    })
}

fn checked_pow(base: u128, exp: u32) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}
