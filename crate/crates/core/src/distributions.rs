//! Population distributions and the rounding marks that make an
//! apportionment unbiased for states drawn from them.
//!
//! For family `f` at divisor `D`, the unbiased mark `r` solves
//!
//! ```text
//! I(r D) = (1 / D) * integral_{f D}^{(f + 1) D} I(v) dv
//! ```
//!
//! where `I` is the cumulative distribution (any additive constant cancels).
//! Power laws have closed-form, divisor-independent marks. Lognormal marks
//! use a closed form for the right-hand side. Everything else goes through
//! adaptive Simpson quadrature followed by bisection.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_divisor, StateProfile, StateSet};
use crate::numeric::{adaptive_simpson, bisect};
use crate::signpost::SignpostRule;

const MARK_TOL: f64 = 1e-12;
const MARK_MAX_ITER: u32 = 200;
const QUAD_REL_TOL: f64 = 1e-13;
const QUAD_MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PopulationDistribution {
    /// Density proportional to `v^(beta - 1)` on `[v_lo, v_hi]`.
    PowerLaw { beta: f64, v_lo: f64, v_hi: f64 },
    /// `ln v` is normal with mean `log_vg` and standard deviation `sigma`.
    LogNormal { log_vg: f64, sigma: f64 },
    Uniform { v_lo: f64, v_hi: f64 },
}

fn check_support(v_lo: f64, v_hi: f64) -> Result<()> {
    if v_lo.is_finite() && v_hi.is_finite() && v_lo > 0.0 && v_lo < v_hi {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!(
            "support must satisfy 0 < lo < hi, got [{v_lo}, {v_hi}]"
        )))
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail, `1 - cdf(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

impl PopulationDistribution {
    pub fn power_law(beta: f64, v_lo: f64, v_hi: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "power-law exponent must be finite, got {beta}"
            )));
        }
        check_support(v_lo, v_hi)?;
        Ok(Self::PowerLaw { beta, v_lo, v_hi })
    }

    pub fn lognormal(log_vg: f64, sigma: f64) -> Result<Self> {
        if !(log_vg.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "lognormal needs finite log-mean and sigma > 0, got ({log_vg}, {sigma})"
            )));
        }
        Ok(Self::LogNormal { log_vg, sigma })
    }

    /// Lognormal whose geometric-mean quota at `divisor` is `qg`.
    pub fn lognormal_from_quota(qg: f64, sigma: f64, divisor: f64) -> Result<Self> {
        check_divisor(divisor)?;
        if !(qg.is_finite() && qg > 0.0) {
            return Err(Error::InvalidDistribution(format!("qg must be positive, got {qg}")));
        }
        Self::lognormal((qg * divisor).ln(), sigma)
    }

    pub fn uniform(v_lo: f64, v_hi: f64) -> Result<Self> {
        check_support(v_lo, v_hi)?;
        Ok(Self::Uniform { v_lo, v_hi })
    }

    /// Normalized distribution function, clamped to `[0, 1]`.
    pub fn cdf(&self, v: f64) -> f64 {
        match *self {
            Self::PowerLaw { v_lo, v_hi, .. } => {
                if v <= v_lo {
                    0.0
                } else if v >= v_hi {
                    1.0
                } else {
                    self.cumulative(v) - self.cumulative(v_lo)
                }
            }
            Self::LogNormal { log_vg, sigma } => {
                if v <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((v.ln() - log_vg) / sigma)
                }
            }
            Self::Uniform { v_lo, v_hi } => ((v - v_lo) / (v_hi - v_lo)).clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        match *self {
            Self::PowerLaw { beta, v_lo, v_hi } => {
                if v < v_lo || v > v_hi {
                    0.0
                } else if beta == 0.0 {
                    1.0 / (v * (v_hi / v_lo).ln())
                } else {
                    beta * v.powf(beta - 1.0) / (v_hi.powf(beta) - v_lo.powf(beta))
                }
            }
            Self::LogNormal { log_vg, sigma } => {
                if v <= 0.0 {
                    return 0.0;
                }
                let z = (v.ln() - log_vg) / sigma;
                (-0.5 * z * z).exp() / (v * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Uniform { v_lo, v_hi } => {
                if v < v_lo || v > v_hi {
                    0.0
                } else {
                    1.0 / (v_hi - v_lo)
                }
            }
        }
    }

    /// The cumulative `I(v)` used for marks, defined up to an additive
    /// constant. For power laws this is the support-free form
    /// `v^beta / (v_hi^beta - v_lo^beta)` (or the log form at `beta = 0`),
    /// which matches the normalized CDF up to a constant on the support.
    pub fn cumulative(&self, v: f64) -> f64 {
        match *self {
            Self::PowerLaw { beta, v_lo, v_hi } => {
                if beta == 0.0 {
                    v.ln() / (v_hi / v_lo).ln()
                } else {
                    v.powf(beta) / (v_hi.powf(beta) - v_lo.powf(beta))
                }
            }
            _ => self.cdf(v),
        }
    }

    /// Whether `I` is integrable on `[0, D]`.
    pub fn integrable_at_zero(&self) -> bool {
        match *self {
            Self::PowerLaw { beta, .. } => beta > -1.0,
            _ => true,
        }
    }

    /// Closed-form `integral_a^b I(v) dv`.
    pub fn cumulative_integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            Self::PowerLaw { beta, v_lo, v_hi } => {
                let antideriv = |v: f64| -> f64 {
                    if v == 0.0 {
                        return 0.0;
                    }
                    if beta == 0.0 {
                        (v * v.ln() - v) / (v_hi / v_lo).ln()
                    } else if beta == -1.0 {
                        v.ln() / (v_hi.powf(beta) - v_lo.powf(beta))
                    } else {
                        v.powf(beta + 1.0) / ((beta + 1.0) * (v_hi.powf(beta) - v_lo.powf(beta)))
                    }
                };
                antideriv(b) - antideriv(a)
            }
            Self::LogNormal { log_vg, sigma } => {
                let k = (log_vg + 0.5 * sigma * sigma).exp();
                let term = |v: f64| -> f64 {
                    if v <= 0.0 {
                        return 0.0;
                    }
                    let z = (v.ln() - log_vg) / sigma;
                    v * std_normal_cdf(z) - k * std_normal_cdf(z - sigma)
                };
                term(b) - term(a)
            }
            Self::Uniform { v_lo, v_hi } => {
                let w = v_hi - v_lo;
                let antideriv = |v: f64| -> f64 {
                    if v <= v_lo {
                        0.0
                    } else if v >= v_hi {
                        0.5 * w + (v - v_hi)
                    } else {
                        0.5 * (v - v_lo) * (v - v_lo) / w
                    }
                };
                antideriv(b) - antideriv(a)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::PowerLaw { beta, v_lo, v_hi } => {
                let u: f64 = rng.random();
                if beta == 0.0 {
                    v_lo * (v_hi / v_lo).powf(u)
                } else {
                    let lo = v_lo.powf(beta);
                    let hi = v_hi.powf(beta);
                    (lo + u * (hi - lo)).powf(1.0 / beta).clamp(v_lo, v_hi)
                }
            }
            Self::LogNormal { log_vg, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (log_vg + sigma * z).exp()
            }
            Self::Uniform { v_lo, v_hi } => {
                let u: f64 = rng.random();
                v_lo + u * (v_hi - v_lo)
            }
        }
    }
}

/// A source of rounding marks `r(f, D)`.
pub trait DivisorMarks: Sync {
    fn mark_at(&self, family: u64, divisor: f64) -> f64;

    /// True when marks do not depend on the divisor.
    fn is_homogeneous(&self) -> bool {
        false
    }
}

impl DivisorMarks for SignpostRule {
    fn mark_at(&self, family: u64, _divisor: f64) -> f64 {
        self.mark(family)
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}

/// Wraps a closure as a mark source.
pub struct MarkFn<F>(pub F);

impl<F: Fn(u64, f64) -> f64 + Sync> DivisorMarks for MarkFn<F> {
    fn mark_at(&self, family: u64, divisor: f64) -> f64 {
        (self.0)(family, divisor)
    }
}

/// Unbiased marks derived from a population distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionMarks {
    pub distribution: PopulationDistribution,
}

impl DistributionMarks {
    pub fn new(distribution: PopulationDistribution) -> Self {
        Self { distribution }
    }
}

impl DivisorMarks for DistributionMarks {
    fn mark_at(&self, family: u64, divisor: f64) -> f64 {
        mark_unchecked(&self.distribution, family, divisor)
    }

    fn is_homogeneous(&self) -> bool {
        matches!(self.distribution, PopulationDistribution::PowerLaw { .. })
    }
}

pub fn unbiased_mark(dist: &PopulationDistribution, f: u64, divisor: f64) -> Result<f64> {
    check_divisor(divisor)?;
    Ok(mark_unchecked(dist, f, divisor))
}

fn mark_unchecked(dist: &PopulationDistribution, f: u64, divisor: f64) -> f64 {
    match *dist {
        PopulationDistribution::PowerLaw { beta, .. } => SignpostRule::PowerLaw(beta).mark(f),
        PopulationDistribution::LogNormal { log_vg, sigma } => {
            lognormal_mark(log_vg - divisor.ln(), sigma, f)
        }
        PopulationDistribution::Uniform { .. } => generic_mark(dist, f, divisor),
    }
}

/// Which tail of the normal the lognormal equations are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Lower,
    Upper,
}

/// Right-hand side `integral_f^{f+1} I_LN(q) dq` for `ln q ~ N(ln_qg, sigma)`,
/// in whichever tail keeps the arithmetic well conditioned. In the upper
/// tail the returned value is `integral_f^{f+1} (1 - I_LN(q)) dq`.
fn lognormal_rhs(ln_qg: f64, sigma: f64, f: u64) -> (Tail, f64) {
    let x = f as f64;
    let k = (ln_qg + 0.5 * sigma * sigma).exp();
    let z = |q: f64| (q.ln() - ln_qg) / sigma;
    let z_hi = z(x + 1.0);
    let tail = if z(x + 0.5) > 0.0 { Tail::Upper } else { Tail::Lower };
    let value = match tail {
        Tail::Lower => {
            let upper = (x + 1.0) * std_normal_cdf(z_hi) - k * std_normal_cdf(z_hi - sigma);
            let lower = if f == 0 {
                0.0
            } else {
                let z_lo = z(x);
                x * std_normal_cdf(z_lo) - k * std_normal_cdf(z_lo - sigma)
            };
            upper - lower
        }
        Tail::Upper => {
            let upper = (x + 1.0) * std_normal_sf(z_hi) - k * std_normal_sf(z_hi - sigma);
            let lower = if f == 0 {
                -k
            } else {
                let z_lo = z(x);
                x * std_normal_sf(z_lo) - k * std_normal_sf(z_lo - sigma)
            };
            upper - lower
        }
    };
    (tail, value)
}

fn lognormal_mark(ln_qg: f64, sigma: f64, f: u64) -> f64 {
    let (tail, target) = lognormal_rhs(ln_qg, sigma, f);
    let x = f as f64;
    let z = |r: f64| {
        if r <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (r.ln() - ln_qg) / sigma
        }
    };
    match tail {
        Tail::Lower => bisect(|r| std_normal_cdf(z(r)) - target, x, x + 1.0, MARK_TOL, MARK_MAX_ITER),
        Tail::Upper => bisect(|r| target - std_normal_sf(z(r)), x, x + 1.0, MARK_TOL, MARK_MAX_ITER),
    }
}

/// The lognormal right-hand side in the lower-tail form, i.e. the mean of
/// `I_LN` over `[f, f + 1]`. Exposed for cross-checking against quadrature.
pub fn lognormal_mean_cumulative(qg: f64, sigma: f64, f: u64) -> f64 {
    match lognormal_rhs(qg.ln(), sigma, f) {
        (Tail::Lower, v) => v,
        (Tail::Upper, v) => 1.0 - v,
    }
}

/// `(1 / D) integral_{fD}^{(f+1)D} I(v) dv` by adaptive Simpson quadrature.
///
/// `shift` is subtracted from the integrand to keep it small; the returned
/// value includes it again.
fn quadrature_mean_cumulative(dist: &PopulationDistribution, f: u64, divisor: f64) -> f64 {
    let lo = f as f64 * divisor;
    let hi = (f + 1) as f64 * divisor;
    let shift = dist.cumulative(hi);
    let mut scale = shift - dist.cumulative(lo + 0.5 * (hi - lo));
    if !(scale.is_finite() && scale > 0.0) {
        scale = (shift - dist.cumulative(lo)).abs();
    }
    if !(scale.is_finite() && scale > 0.0) {
        scale = 1.0;
    }
    let tol = QUAD_REL_TOL * divisor * scale;
    let integral = if f == 0 && !dist.cumulative(0.0).is_finite() {
        // v = D u^4 tames an integrable singularity of I at the origin.
        let g = |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                let v = divisor * u.powi(4);
                (dist.cumulative(v) - shift) * 4.0 * divisor * u.powi(3)
            }
        };
        adaptive_simpson(&g, 0.0, 1.0, tol, QUAD_MAX_DEPTH)
    } else {
        let g = |v: f64| dist.cumulative(v) - shift;
        adaptive_simpson(&g, lo, hi, tol, QUAD_MAX_DEPTH)
    };
    shift + integral / divisor
}

/// Mark by quadrature and bisection, with no distribution-specific closed
/// forms. Works for any distribution.
pub fn unbiased_mark_generic(dist: &PopulationDistribution, f: u64, divisor: f64) -> Result<f64> {
    check_divisor(divisor)?;
    Ok(generic_mark(dist, f, divisor))
}

fn generic_mark(dist: &PopulationDistribution, f: u64, divisor: f64) -> f64 {
    let x = f as f64;
    if f == 0 && !dist.integrable_at_zero() {
        return 0.0;
    }
    let lo = x * divisor;
    let hi = (x + 1.0) * divisor;
    if dist.cumulative(lo) == dist.cumulative(hi) {
        // No mass in the family: use the end nearer the mass.
        let below = dist.cdf(lo);
        return if below >= 1.0 {
            x
        } else if below <= 0.0 {
            x + 1.0
        } else {
            x + 0.5
        };
    }
    let target = quadrature_mean_cumulative(dist, f, divisor);
    bisect(
        |r| dist.cumulative(r * divisor) - target,
        x,
        x + 1.0,
        MARK_TOL,
        MARK_MAX_ITER,
    )
}

/// `I(r D) - (1 / D) integral I` evaluated with closed-form integrals. Zero
/// at an unbiased mark.
pub fn mark_residual(dist: &PopulationDistribution, f: u64, divisor: f64, mark: f64) -> f64 {
    if let PopulationDistribution::LogNormal { log_vg, sigma } = *dist {
        let ln_qg = log_vg - divisor.ln();
        let z = (mark.ln() - ln_qg) / sigma;
        return match lognormal_rhs(ln_qg, sigma, f) {
            (Tail::Lower, t) => std_normal_cdf(z) - t,
            (Tail::Upper, t) => t - std_normal_sf(z),
        };
    }
    let lo = f as f64 * divisor;
    let hi = (f + 1) as f64 * divisor;
    dist.cumulative(mark * divisor) - dist.cumulative_integral(lo, hi) / divisor
}

/// Expected seats minus expected quota per drawn state in family `f`,
/// `(1 / D) integral I - I(r D)`. Positive means the family is over-served.
pub fn expected_family_bias(
    dist: &PopulationDistribution,
    divisor: f64,
    f: u64,
    mark: f64,
) -> Result<f64> {
    check_divisor(divisor)?;
    let x = f as f64;
    if !(mark >= x && mark <= x + 1.0) {
        return Err(Error::MarkOutOfRange { family: f, mark });
    }
    if f == 0 && !dist.integrable_at_zero() {
        return Err(Error::DivergentMass(f));
    }
    Ok(-mark_residual(dist, f, divisor, mark))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSample {
    pub d_from: f64,
    pub d_to: f64,
    /// Finite-difference slope of `r(f, D) D`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImmunityReport {
    pub family: u64,
    pub slopes: Vec<SlopeSample>,
    /// Slopes below the tolerance.
    pub violations: Vec<SlopeSample>,
}

impl ImmunityReport {
    pub fn is_immune(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().map(|s| s.slope).fold(f64::INFINITY, f64::min)
    }
}

pub const IMMUNITY_SLOPE_TOL: f64 = -1e-8;

/// Checks numerically that `r(f, D) D` never decreases along `d_grid`, the
/// condition under which marks cannot overtake states as `D` shrinks.
pub fn verify_alabama_immunity<M: DivisorMarks + ?Sized>(
    marks: &M,
    f: u64,
    d_grid: &[f64],
) -> Result<ImmunityReport> {
    if d_grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "divisor grid needs at least two points".into(),
        ));
    }
    for &d in d_grid {
        check_divisor(d)?;
    }
    if d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "divisor grid must be strictly ascending".into(),
        ));
    }
    let scaled: Vec<f64> = d_grid.iter().map(|&d| marks.mark_at(f, d) * d).collect();
    let slopes: Vec<SlopeSample> = d_grid
        .windows(2)
        .zip(scaled.windows(2))
        .map(|(d, rd)| SlopeSample {
            d_from: d[0],
            d_to: d[1],
            slope: (rd[1] - rd[0]) / (d[1] - d[0]),
        })
        .collect();
    let violations = slopes
        .iter()
        .filter(|s| s.slope < IMMUNITY_SLOPE_TOL)
        .cloned()
        .collect();
    Ok(ImmunityReport {
        family: f,
        slopes,
        violations,
    })
}

fn state_name(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("S{:0width$}", i + 1)
}

/// Draws `n` i.i.d. states. The same seed always yields the same set.
pub fn sample_states(dist: &PopulationDistribution, n: usize, seed: u64) -> Result<StateSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..n)
        .map(|i| StateProfile::new(state_name(i, n), dist.sample(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    StateSet::new(states)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyBias {
    pub family: u64,
    /// Mean of `S_f - Q_f` per replication; replications without members
    /// of the family count as zero.
    pub mean: f64,
    /// Standard error of the mean; NaN with a single replication.
    pub std_error: f64,
    /// Replications in which the family was non-empty.
    pub occupied: u64,
}

const MC_CHUNK: u64 = 512;
const MARK_CACHE: usize = 4096;

#[derive(Default)]
struct BiasAccumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    occupied: Vec<u64>,
}

impl BiasAccumulator {
    fn grow(&mut self, len: usize) {
        if self.sum.len() < len {
            self.sum.resize(len, 0.0);
            self.sum_sq.resize(len, 0.0);
            self.occupied.resize(len, 0);
        }
    }

    fn merge(&mut self, other: &BiasAccumulator) {
        self.grow(other.sum.len());
        for i in 0..other.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
            self.occupied[i] += other.occupied[i];
        }
    }
}

/// Monte Carlo estimate of `<S_f> - <Q_f>` per family when `n_states` states
/// are drawn from `dist` and rounded individually with `marks` at `divisor`.
///
/// Replication `i` draws from a ChaCha stream selected by `i` under the
/// master seed, and chunks are merged in a fixed order, so results do not
/// depend on the number of worker threads.
pub fn monte_carlo_bias<M: DivisorMarks + ?Sized>(
    dist: &PopulationDistribution,
    divisor: f64,
    marks: &M,
    replications: u64,
    n_states: usize,
    seed: u64,
) -> Result<Vec<FamilyBias>> {
    check_divisor(divisor)?;
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be at least 1".into()));
    }
    if n_states == 0 {
        return Err(Error::InvalidArgument("n_states must be at least 1".into()));
    }
    let cache: Vec<OnceLock<f64>> = (0..MARK_CACHE).map(|_| OnceLock::new()).collect();
    let mark = |f: u64| -> f64 {
        match cache.get(f as usize) {
            Some(cell) => *cell.get_or_init(|| marks.mark_at(f, divisor)),
            None => marks.mark_at(f, divisor),
        }
    };

    let chunks = replications.div_ceil(MC_CHUNK);
    let partials: Vec<BiasAccumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = BiasAccumulator::default();
            let mut rep: Vec<(u64, f64)> = Vec::with_capacity(n_states);
            let start = c * MC_CHUNK;
            let end = (start + MC_CHUNK).min(replications);
            for i in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                rep.clear();
                for _ in 0..n_states {
                    let q = dist.sample(&mut rng) / divisor;
                    let f = q.floor() as u64;
                    let seats = if q >= mark(f) { f + 1 } else { f };
                    rep.push((f, seats as f64 - q));
                }
                rep.sort_by_key(|&(f, _)| f);
                let top = rep.last().map(|&(f, _)| f as usize + 1).unwrap_or(0);
                acc.grow(top);
                let mut k = 0;
                while k < rep.len() {
                    let f = rep[k].0;
                    let mut diff = 0.0;
                    while k < rep.len() && rep[k].0 == f {
                        diff += rep[k].1;
                        k += 1;
                    }
                    let f = f as usize;
                    acc.sum[f] += diff;
                    acc.sum_sq[f] += diff * diff;
                    acc.occupied[f] += 1;
                }
            }
            acc
        })
        .collect();

    let mut total = BiasAccumulator::default();
    for p in &partials {
        total.merge(p);
    }
    let r = replications as f64;
    Ok((0..total.sum.len())
        .map(|f| {
            let mean = total.sum[f] / r;
            let std_error = if replications > 1 {
                let var = ((total.sum_sq[f] - r * mean * mean) / (r - 1.0)).max(0.0);
                (var / r).sqrt()
            } else {
                f64::NAN
            };
            FamilyBias {
                family: f as u64,
                mean,
                std_error,
                occupied: total.occupied[f],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_q(qg: f64) -> PopulationDistribution {
        PopulationDistribution::lognormal(qg.ln(), 1.0).unwrap()
    }

    #[test]
    fn lognormal_marks_for_sample_grid_points() {
        assert!((unbiased_mark(&ln_q(1.0), 0, 1.0).unwrap() - 0.491).abs() < 5e-4);
        assert!((unbiased_mark(&ln_q(5.0), 1, 1.0).unwrap() - 1.506).abs() < 5e-4);
        assert!((unbiased_mark(&ln_q(20.0), 20, 1.0).unwrap() - 20.498).abs() < 5e-4);
    }

    #[test]
    fn lognormal_mark_depends_only_on_quota_scale() {
        let d = 761_168.8;
        let a = PopulationDistribution::lognormal_from_quota(5.0, 1.0, d).unwrap();
        for f in [0, 1, 3, 9] {
            let r1 = unbiased_mark(&a, f, d).unwrap();
            let r2 = unbiased_mark(&ln_q(5.0), f, 1.0).unwrap();
            assert!((r1 - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_density_gives_webster_by_both_routes() {
        let pl = PopulationDistribution::power_law(1.0, 1e-6, 1e9).unwrap();
        for f in 0..15 {
            for d in [0.3, 7.0, 1e3] {
                let closed = unbiased_mark(&pl, f, d).unwrap();
                let generic = unbiased_mark_generic(&pl, f, d).unwrap();
                assert!((closed - (f as f64 + 0.5)).abs() < 1e-12);
                assert!((generic - closed).abs() < 1e-9, "f={f} d={d}");
            }
        }
    }

    #[test]
    fn hill_power_law_generic_route_matches_closed_form() {
        let pl = PopulationDistribution::power_law(-2.0, 1e-3, 1e6).unwrap();
        for d in [0.5, 2.0, 40.0] {
            let generic = unbiased_mark_generic(&pl, 3, d).unwrap();
            assert!((generic - 12f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_distribution_outside_support_uses_nearest_end() {
        let u = PopulationDistribution::uniform(100.0, 200.0).unwrap();
        // Family interval [10, 20] lies below all mass.
        assert_eq!(unbiased_mark(&u, 1, 10.0).unwrap(), 2.0);
        // Family interval [1000, 1100] lies above all mass.
        assert_eq!(unbiased_mark(&u, 10, 100.0).unwrap(), 10.0);
        // Fully inside the support the density is flat, so Webster.
        let r = unbiased_mark(&u, 12, 10.0).unwrap();
        assert!((r - 12.5).abs() < 1e-9);
    }

    #[test]
    fn bias_vanishes_at_the_unbiased_mark() {
        let dists = [
            ln_q(5.0),
            PopulationDistribution::power_law(-2.0, 1e-3, 1e6).unwrap(),
            PopulationDistribution::power_law(0.0, 1e-3, 1e6).unwrap(),
            PopulationDistribution::uniform(0.5, 30.0).unwrap(),
        ];
        for dist in &dists {
            for f in 1..8 {
                let r = unbiased_mark(dist, f, 1.0).unwrap();
                let b = expected_family_bias(dist, 1.0, f, r).unwrap();
                assert!(b.abs() < 1e-9, "{dist:?} f={f} b={b}");
            }
        }
    }

    #[test]
    fn bias_sign_examples() {
        assert!(expected_family_bias(&ln_q(5.0), 1.0, 1, 1.5).unwrap() > 0.0);
        let hill = PopulationDistribution::power_law(-2.0, 1e-3, 1e6).unwrap();
        assert!(expected_family_bias(&hill, 1.0, 1, 1.5).unwrap() < 0.0);
        assert!(matches!(
            expected_family_bias(&hill, 1.0, 1, 2.5),
            Err(Error::MarkOutOfRange { .. })
        ));
        assert_eq!(
            expected_family_bias(&hill, 1.0, 0, 0.0),
            Err(Error::DivergentMass(0))
        );
    }

    #[test]
    fn finite_difference_of_cdf_is_pdf() {
        let dists = [
            ln_q(3.0),
            PopulationDistribution::power_law(-1.5, 0.1, 50.0).unwrap(),
            PopulationDistribution::power_law(0.0, 0.1, 50.0).unwrap(),
            PopulationDistribution::power_law(2.0, 0.1, 50.0).unwrap(),
            PopulationDistribution::uniform(0.1, 50.0).unwrap(),
        ];
        for d in &dists {
            for v in [0.7, 2.0, 5.5, 13.0, 40.0] {
                let h = v * 1e-5;
                let fd = (d.cdf(v + h) - d.cdf(v - h)) / (2.0 * h);
                let p = d.pdf(v);
                assert!((fd - p).abs() <= 1e-6 * p.abs().max(1e-12), "{d:?} v={v}");
            }
        }
    }

    #[test]
    fn bounded_cdfs_integrate_to_one() {
        let pl = PopulationDistribution::power_law(-3.0, 0.5, 80.0).unwrap();
        assert!((pl.cdf(80.0) - pl.cdf(0.5) - 1.0).abs() < 1e-12);
        assert!((pl.cumulative(80.0) - pl.cumulative(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn immunity_detector_fires_on_overtaking_marks() {
        let grid: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
        let bad = MarkFn(|f: u64, d: f64| f as f64 + (1.0 / (d * d)).min(1.0));
        let rep = verify_alabama_immunity(&bad, 0, &grid).unwrap();
        assert!(!rep.is_immune());
        let rep = verify_alabama_immunity(&SignpostRule::HuntingtonHill, 4, &grid).unwrap();
        assert!(rep.is_immune());
        for s in &rep.slopes {
            assert!((s.slope - SignpostRule::HuntingtonHill.mark(4)).abs() < 1e-9);
        }
        assert!(verify_alabama_immunity(&SignpostRule::Webster, 0, &[1.0]).is_err());
        assert!(verify_alabama_immunity(&SignpostRule::Webster, 0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = PopulationDistribution::lognormal(15.218, 1.024).unwrap();
        let a = sample_states(&d, 50, 7).unwrap();
        let b = sample_states(&d, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_states(&d, 50, 8).unwrap());
        assert!(sample_states(&d, 0, 7).is_err());

        let mean = a.states().iter().map(|s| s.population.ln()).sum::<f64>() / 50.0;
        assert!((mean - 15.218).abs() < 3.0 * 1.024 / 50f64.sqrt());
    }

    #[test]
    fn power_law_samples_stay_in_support() {
        for beta in [-2.0, 0.0, 1.5] {
            let d = PopulationDistribution::power_law(beta, 3.0, 30.0).unwrap();
            let s = sample_states(&d, 500, 1).unwrap();
            assert!(s.states().iter().all(|x| (3.0..=30.0).contains(&x.population)));
        }
    }

    #[test]
    fn single_replication_single_state() {
        let d = ln_q(5.0);
        let out = monte_carlo_bias(&d, 1.0, &SignpostRule::Webster, 1, 1, 3).unwrap();
        let occupied: Vec<&FamilyBias> = out.iter().filter(|b| b.occupied > 0).collect();
        assert_eq!(occupied.len(), 1);
        let b = occupied[0];
        assert!(b.mean > -1.0 && b.mean < 1.0);
        let s = sample_states(&d, 1, 0).unwrap();
        let _ = s;
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let d = ln_q(5.0);
        let a = monte_carlo_bias(&d, 1.0, &SignpostRule::Webster, 2000, 10, 11).unwrap();
        let b = monte_carlo_bias(&d, 1.0, &SignpostRule::Webster, 2000, 10, 11).unwrap();
        assert_eq!(a, b);
    }
}
