//! Small statistics helpers shared by the experiments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbeError};
use crate::norms::holder_exponent;
use crate::rng::seeded_rng;

/// Sum in a fixed pairwise order, so results do not depend on how the
/// inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < n {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[n - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeCi {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub resamples: usize,
}

/// Log-log slope of per-span means of `samples[path][span]`, with a
/// percentile bootstrap interval over paths.
pub fn bootstrap_slope(spans: &[f64], samples: &[Vec<f64>], resamples: usize, level: f64, seed: u64) -> Result<SlopeCi> {
    let n = samples.len();
    if n < 2 {
        return Err(SbeError::Degenerate("need at least 2 samples for a bootstrap".into()));
    }
    let means_of = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let picked: Vec<usize> = idx.collect();
        (0..spans.len())
            .map(|j| mean(&picked.iter().map(|&i| samples[i][j]).collect::<Vec<_>>()))
            .collect()
    };
    let fit = holder_exponent(spans, &means_of(&mut (0..n)))?;
    let mut rng = seeded_rng(seed);
    let mut slopes = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let m = means_of(&mut (0..n).map(|_| rng.random_range(0..n)));
        if let Ok(f) = holder_exponent(spans, &m) {
            slopes.push(f.slope);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(SlopeCi {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        lo: quantile(&slopes, tail),
        hi: quantile(&slopes, 1.0 - tail),
        level,
        resamples: slopes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_has_degenerate_interval() {
        let spans = [0.125, 0.25, 0.5, 1.0];
        let samples: Vec<Vec<f64>> = (1..=20).map(|k| spans.iter().map(|s| k as f64 * s * s).collect()).collect();
        let ci = bootstrap_slope(&spans, &samples, 200, 0.95, 3).unwrap();
        assert!((ci.slope - 2.0).abs() < 1e-12);
        assert!((ci.lo - 2.0).abs() < 1e-12 && (ci.hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn helpers() {
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(quantile(&[0.0, 1.0, 2.0], 0.25), 0.5);
        assert!((std_error(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
