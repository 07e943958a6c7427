//! Statistics of log-populations: moments, histograms and power-law fits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::StateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentConvention {
    /// Central moments divided by `N`.
    Population,
    /// Bias-corrected: `N - 1` variance, adjusted skew `G1` and excess
    /// kurtosis `G2`. This is the convention that reproduces the historical
    /// census tables.
    SampleCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogMoments {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    pub convention: MomentConvention,
}

/// Moments of `ln v` under the sample-corrected convention.
pub fn log_moments(states: &StateSet) -> Result<LogMoments> {
    log_moments_with(states, MomentConvention::SampleCorrected)
}

pub fn log_moments_with(states: &StateSet, convention: MomentConvention) -> Result<LogMoments> {
    let needed = match convention {
        MomentConvention::Population => 2,
        MomentConvention::SampleCorrected => 4,
    };
    let logs: Vec<f64> = states.states().iter().map(|s| s.population.ln()).collect();
    let n = logs.len();
    if n < needed {
        return Err(Error::TooFewStates { needed, got: n });
    }
    let nf = n as f64;
    let mean = logs.iter().sum::<f64>() / nf;
    let central = |k: i32| logs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / nf;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    if m2 <= (f64::EPSILON * mean.abs()).powi(2) {
        return Err(Error::DegenerateSample);
    }
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let (std, skew, excess_kurtosis) = match convention {
        MomentConvention::Population => (m2.sqrt(), g1, g2),
        MomentConvention::SampleCorrected => (
            (m2 * nf / (nf - 1.0)).sqrt(),
            g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0),
            ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)),
        ),
    };
    Ok(LogMoments {
        mean,
        std,
        skew,
        excess_kurtosis,
        convention,
    })
}

/// Counts of `ln v` in bins `[origin + k w, origin + (k + 1) w)`, from the
/// lowest to the highest occupied bin with empty bins in between kept.
pub fn log_histogram(states: &StateSet, bin_width: f64, origin: f64) -> Result<Vec<(f64, usize)>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidBinWidth(bin_width));
    }
    if !origin.is_finite() {
        return Err(Error::InvalidArgument(format!("bin origin must be finite, got {origin}")));
    }
    let idx: Vec<i64> = states
        .states()
        .iter()
        .map(|s| ((s.population.ln() - origin) / bin_width).floor() as i64)
        .collect();
    let lo = *idx.iter().min().expect("state set is non-empty");
    let hi = *idx.iter().max().expect("state set is non-empty");
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for k in idx {
        counts[(k - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (origin + (lo + i as i64) as f64 * bin_width, c))
        .collect())
}

/// Log-likelihood of the populations as i.i.d. draws from the density
/// proportional to `v^(beta - 1)` on `support`, for each integer `beta`.
pub fn powerlaw_loglik_scan(
    states: &StateSet,
    betas: &[i32],
    support: (f64, f64),
) -> Result<Vec<(i32, f64)>> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Error::InvalidRange { lo, hi });
    }
    for s in states.states() {
        if s.population < lo || s.population > hi {
            return Err(Error::OutsideSupport {
                name: s.name.clone(),
                population: s.population,
                lo,
                hi,
            });
        }
    }
    let n = states.len() as f64;
    let sum_log: f64 = states.states().iter().map(|s| s.population.ln()).sum();
    Ok(betas
        .iter()
        .map(|&beta| {
            let b = beta as f64;
            let log_norm = if beta == 0 {
                (hi / lo).ln().ln()
            } else {
                ((hi.powf(b) - lo.powf(b)) / b).ln()
            };
            (beta, (b - 1.0) * sum_log - n * log_norm)
        })
        .collect())
}

/// `(lowest, highest)` population, the default likelihood support.
pub fn observed_support(states: &StateSet) -> (f64, f64) {
    (states.min_population(), states.max_population())
}
