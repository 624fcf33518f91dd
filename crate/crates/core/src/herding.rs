//! Herding under uniform adoption.
//!
//! When every agent adopts every other agent with equal probability, the
//! agents who decide directly each grow a herd by proportional preferential
//! attachment (a Polya urn with unit feedback). As the population grows, the
//! fraction of agents in the largest of `d` herds has closed-form moments
//! `M^(m)_d`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cascade::substream;
use crate::error::{Error, Result};

/// Half-width, in standard deviations, of the normal approximation to the
/// number of decisive agents.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

/// Quantile levels reported by [`simulate_urn`].
pub const URN_QUANTILES: [f64; 4] = [0.05, 0.2, 0.8, 0.95];

/// `H_d / d`: limiting expected fraction of agents in the largest herd.
pub fn expected_max_herd_fraction(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("need at least one decisive agent".into()));
    }
    let harmonic: f64 = (1..=d).rev().map(|k| 1.0 / k as f64).sum();
    Ok(harmonic / d as f64)
}

/// Which recurrence fills a [`HerdMomentTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recurrence {
    /// `M^(m)_d = Σ_k (d-1)/d^k · m!/(m-k)! · (m+d-k-2)!/(m+d-1)! · M^(m-k)_{d-1}`.
    Summation,
    /// `M^(m)_d = (d-1)/(m+d-1) M^(m)_{d-1} + m/(d(m+d-1)) M^(m-1)_d`.
    TwoTerm,
    /// `M^(m)_d = m/(m+d-1) Σ_j (d-1)!/j! · (m+j-2)!/(m+d-2)! · M^(m-1)_j`.
    Nested,
}

/// `M^(m)_d` for `1 ≤ d ≤ d_max` and `0 ≤ m ≤ m_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HerdMomentTable {
    pub d_max: usize,
    pub m_max: usize,
    /// `values[d - 1][m]`.
    pub values: Vec<Vec<f64>>,
    /// Largest disagreement between the two-term fill and the other two.
    pub max_disagreement: f64,
}

impl HerdMomentTable {
    pub fn get(&self, d: usize, m: usize) -> f64 {
        self.values[d - 1][m]
    }
}

/// Fills the table with one recurrence only.
pub fn moments_by(recurrence: Recurrence, d_max: usize, m_max: usize) -> Vec<Vec<f64>> {
    let mut v = vec![vec![1.0; m_max + 1]; d_max];
    for d in 2..=d_max {
        for m in 1..=m_max {
            let (df, mf) = (d as f64, m as f64);
            v[d - 1][m] = match recurrence {
                Recurrence::TwoTerm => {
                    (df - 1.0) / (mf + df - 1.0) * v[d - 2][m]
                        + mf / (df * (mf + df - 1.0)) * v[d - 1][m - 1]
                }
                Recurrence::Summation => (0..=m)
                    .map(|k| {
                        let mut coef = (df - 1.0) / (mf + df - k as f64 - 1.0);
                        for i in 1..=k {
                            coef *= (m - k + i) as f64 / (df * (m + d - k - 1 + i) as f64);
                        }
                        coef * v[d - 2][m - k]
                    })
                    .sum(),
                Recurrence::Nested => {
                    let sum: f64 = (1..=d)
                        .map(|j| {
                            let coef = if j == d {
                                1.0 / df
                            } else {
                                (j + 1..d).fold(1.0 / (mf + j as f64 - 1.0), |c, s| {
                                    c * s as f64 / (mf + s as f64 - 1.0)
                                })
                            };
                            coef * v[j - 1][m - 1]
                        })
                        .sum();
                    mf / (mf + df - 1.0) * sum
                }
            };
        }
    }
    v
}

/// Moment table filled by the two-term recurrence and cross-checked
/// against the summation and nested forms.
pub fn herd_moments(d_max: usize, m_max: usize) -> Result<HerdMomentTable> {
    if d_max == 0 || m_max == 0 {
        return Err(Error::Domain("d_max and m_max must be at least 1".into()));
    }
    let values = moments_by(Recurrence::TwoTerm, d_max, m_max);
    let mut max_disagreement: f64 = 0.0;
    for other in [Recurrence::Summation, Recurrence::Nested] {
        let alt = moments_by(other, d_max, m_max);
        for (a, b) in values.iter().flatten().zip(alt.iter().flatten()) {
            max_disagreement = max_disagreement.max((a - b).abs());
        }
    }
    Ok(HerdMomentTable {
        d_max,
        m_max,
        values,
        max_disagreement,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UrnSummary {
    pub bins: usize,
    pub total: usize,
    pub trials: usize,
    /// Mean of `max bin / total` over trials.
    pub mean: f64,
    pub standard_error: f64,
    /// `(level, value)` for each of [`URN_QUANTILES`].
    pub quantiles: Vec<(f64, f64)>,
}

/// Largest bin fraction of one urn run: `bins` balls to start with, then
/// each new ball copies the bin of a uniformly drawn existing ball.
pub fn urn_max_fraction<R: Rng + ?Sized>(bins: usize, total: usize, rng: &mut R) -> f64 {
    let mut ball_bin: Vec<u32> = Vec::with_capacity(total);
    ball_bin.extend(0..bins as u32);
    let mut counts = vec![1u32; bins];
    while ball_bin.len() < total {
        let b = ball_bin[rng.random_range(0..ball_bin.len())];
        counts[b as usize] += 1;
        ball_bin.push(b);
    }
    *counts.iter().max().expect("at least one bin") as f64 / total as f64
}

/// Repeated urn runs; trial `t` uses substream `t` of `seed`.
pub fn simulate_urn(bins: usize, total: usize, trials: usize, seed: u64) -> Result<UrnSummary> {
    if bins == 0 || bins > total {
        return Err(Error::Domain(format!(
            "need 1 <= bins <= total, got {bins} and {total}"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let mut samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| urn_max_fraction(bins, total, &mut substream(seed, t)))
        .collect();
    let n = trials as f64;
    // Sum of integer counts, divided once, so degenerate urns are exact.
    let max_counts: f64 = samples.iter().map(|x| (x * total as f64).round()).sum();
    let mean = max_counts / (n * total as f64);
    let var = if trials > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    samples.sort_by(f64::total_cmp);
    let quantiles = URN_QUANTILES
        .iter()
        .map(|&q| (q, quantile(&samples, q)))
        .collect();
    Ok(UrnSummary {
        bins,
        total,
        trials,
        mean,
        standard_error: (var / n).sqrt(),
        quantiles,
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Approximate `E[f(H/|A|)]` for a polynomial `f(x) = Σ_m coeffs[m] x^m`
/// when each agent is decisive with probability `gamma`.
///
/// The decisive count is approximated by a normal with the binomial's mean
/// and variance, discretized with a continuity correction, restricted to
/// `1 ≤ d ≤ population` within [`TRUNCATION_SIGMAS`] of the mean and
/// renormalized.
pub fn expected_smooth_function(
    population: usize,
    gamma: f64,
    coeffs: &[f64],
    m_max: usize,
) -> Result<f64> {
    if population == 0 {
        return Err(Error::Domain("population must be positive".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let degree = coeffs.len().saturating_sub(1);
    if degree > m_max {
        return Err(Error::Domain(format!(
            "polynomial of degree {degree} needs more than {m_max} moments"
        )));
    }
    let n = population as f64;
    let mu = n * gamma;
    let sigma = (n * gamma * (1.0 - gamma)).sqrt();
    let lo = ((mu - TRUNCATION_SIGMAS * sigma).floor().max(1.0) as usize).min(population);
    let hi = ((mu + TRUNCATION_SIGMAS * sigma).ceil() as usize).clamp(lo, population);

    let normal = Normal::new(mu, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut weights: Vec<f64> = (lo..=hi)
        .map(|d| normal.cdf(d as f64 + 0.5) - normal.cdf(d as f64 - 0.5))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // All mass lies between two integers' half-points outside the range.
        let nearest = (mu.round() as usize).clamp(lo, hi);
        weights = (lo..=hi)
            .map(|d| if d == nearest { 1.0 } else { 0.0 })
            .collect();
    } else {
        weights.iter_mut().for_each(|w| *w /= total);
    }

    let table = herd_moments(hi.max(1), degree.max(1))?;
    Ok((lo..=hi)
        .zip(weights)
        .map(|(d, wt)| {
            let ef: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(m, a)| a * table.get(d, m))
                .sum();
            wt * ef
        })
        .sum())
}
