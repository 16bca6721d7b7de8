//! Small statistics toolkit: sample median, percentile bootstrap of the
//! median, Kolmogorov-Smirnov against a uniform law, and the sign test.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng_from_seed;

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Median of already sorted values; the mean of the two middle ones for even `n`.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(median_sorted(&v))
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Resampling plan for the bootstrap distribution of the median of `n` values.
///
/// The median of a resample only depends on which order statistics of the
/// original sample land in its middle, so each resample is stored as the pair
/// of sorted-sample ranks forming its median. The plan can then be applied to
/// any number of samples of size `n` without redrawing.
#[derive(Debug, Clone)]
pub struct BootstrapPlan {
    n: usize,
    middle: Vec<(usize, usize)>,
}

impl BootstrapPlan {
    pub fn new(n: usize, resamples: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("bootstrap sample"));
        }
        if resamples == 0 {
            return Err(invalid("bootstrap needs at least one resample"));
        }
        let mut rng = rng_from_seed(seed);
        let mut counts = vec![0usize; n];
        let (lo_rank, hi_rank) = ((n - 1) / 2, n / 2);
        let middle = (0..resamples)
            .map(|_| {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                let mut cum = 0;
                let mut lo = None;
                let mut hi = n - 1;
                for (i, &c) in counts.iter().enumerate() {
                    cum += c;
                    if lo.is_none() && cum > lo_rank {
                        lo = Some(i);
                    }
                    if cum > hi_rank {
                        hi = i;
                        break;
                    }
                }
                (lo.unwrap_or(hi), hi)
            })
            .collect();
        Ok(Self { n, middle })
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// `(median, lo, hi)` for the given confidence level.
    ///
    /// The percentile interval is widened to contain the sample median if the
    /// bootstrap distribution is lopsided enough to exclude it.
    pub fn median_ci(&self, values: &[f64], confidence: f64) -> Result<(f64, f64, f64)> {
        if values.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: values.len(),
            });
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(invalid("confidence must lie in (0, 1)"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let med = median_sorted(&sorted);
        let mut boot: Vec<f64> = self
            .middle
            .iter()
            .map(|&(a, b)| 0.5 * (sorted[a] + sorted[b]))
            .collect();
        boot.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - confidence);
        let lo = quantile_sorted(&boot, tail).min(med);
        let hi = quantile_sorted(&boot, 1.0 - tail).max(med);
        Ok((med, lo, hi))
    }
}

/// Sample median with a seeded percentile-bootstrap confidence interval.
pub fn median_ci(
    values: &[f64],
    confidence: f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    BootstrapPlan::new(values.len(), resamples, seed)?.median_ci(values, confidence)
}

/// Kolmogorov-Smirnov statistic of `samples` against Uniform(a, b).
pub fn ks_statistic_uniform(samples: &[f64], a: f64, b: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = ((x - a) / (b - a)).clamp(0.0, 1.0);
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples, with the
/// Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sided exact sign-test p-value `P(X ≥ wins)` for `X ~ Bin(wins + losses, ½)`.
pub fn sign_test_pvalue(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_choose = 0.0; // ln C(n, 0)
    let mut tail = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            tail += (ln_choose + ln_half_n).exp();
        }
    }
    tail.min(1.0)
}
