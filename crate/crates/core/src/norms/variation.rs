//! p-variation: exact dynamic programming, the dyadic upper estimator,
//! and the variation of `t ↦ μ_{a,t}` in the SBE norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sbe::{sbe_norm, SbeParams};
use crate::error::{invalid, Result, SbeError};
use crate::occupation::{occupation, SmallBallIndex};
use crate::path::SampledPath;

/// `max Σ dist(i_m, i_{m+1})^p` over index chains `0 = i_0 < ⋯ < i_M = n−1`.
pub fn p_variation_pow(n: usize, dist: impl Fn(usize, usize) -> f64, p: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut best = vec![0.0f64; n];
    for j in 1..n {
        let mut b = f64::NEG_INFINITY;
        for (i, &bi) in best.iter().enumerate().take(j) {
            b = b.max(bi + dist(i, j).powf(p));
        }
        best[j] = b;
    }
    best[n - 1]
}

/// [`p_variation_pow`] as a norm. When the one-step partition is optimal
/// its increment is returned as is, so monotone sequences come out exact.
pub fn p_variation_with(n: usize, dist: impl Fn(usize, usize) -> f64, p: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let best = p_variation_pow(n, &dist, p);
    let direct = dist(0, n - 1);
    if direct.powf(p) >= best {
        direct
    } else {
        best.powf(1.0 / p)
    }
}

/// Exact `‖f‖_{V^p}` of a finite sequence, with `norm` evaluating
/// `‖f_j − f_i‖` from the two samples.
pub fn p_variation<T>(values: &[T], norm: impl Fn(&T, &T) -> f64, p: f64) -> f64 {
    p_variation_with(values.len(), |i, j| norm(&values[i], &values[j]), p)
}

pub fn p_variation_real(values: &[f64], p: f64) -> f64 {
    p_variation(values, |a, b| (b - a).abs(), p)
}

/// Output of [`dyadic_variation_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicBound {
    /// `Σ_N N^ε Σ_k ‖f(t^N_{k+1}) − f(t^N_k)‖^q`
    pub raw: f64,
    /// `C(q, ε) = 2^{q−1} (1 − 2^{−ε/(q−1)})^{−(q−1)}`, equal to 1 at `q = 1`.
    pub constant: f64,
    /// `constant · raw`, an upper bound for `‖f‖_{V^q}^q` over the dyadic grid.
    pub bound: f64,
    /// `Σ_k ‖·‖^q` at each level `N = 2^l`.
    pub level_sums: Vec<f64>,
}

/// Dyadic estimator from increment norms: `levels[l]` holds the `2^l`
/// increment norms at level `N = 2^l`.
pub fn dyadic_variation_bound(levels: &[Vec<f64>], q: f64, epsilon: f64) -> Result<DyadicBound> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(invalid("q", "must be finite and >= 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1)"));
    }
    let mut raw = 0.0;
    let mut level_sums = Vec::with_capacity(levels.len());
    for (l, incs) in levels.iter().enumerate() {
        if incs.len() != 1 << l {
            return Err(invalid("levels", format!("level {l} has {} increments, expected {}", incs.len(), 1usize << l)));
        }
        let s: f64 = incs.iter().map(|x| x.powf(q)).sum();
        level_sums.push(s);
        raw += 2f64.powf(l as f64 * epsilon) * s;
    }
    let constant = if q == 1.0 {
        1.0
    } else {
        2f64.powf(q - 1.0) * (1.0 - 2f64.powf(-epsilon / (q - 1.0))).powf(-(q - 1.0))
    };
    Ok(DyadicBound {
        raw,
        constant,
        bound: constant * raw,
        level_sums,
    })
}

/// Increment norms at every dyadic level of a sequence with `2^L + 1` samples.
pub fn dyadic_increments<T>(values: &[T], norm: impl Fn(&T, &T) -> f64) -> Result<Vec<Vec<f64>>> {
    let n = values.len().saturating_sub(1);
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid("values", format!("need 2^L + 1 samples, got {}", values.len())));
    }
    let top = n.trailing_zeros() as usize;
    Ok((0..=top)
        .map(|l| {
            let step = n >> l;
            (0..1usize << l)
                .map(|k| norm(&values[k * step], &values[(k + 1) * step]))
                .collect()
        })
        .collect())
}

/// `‖t ↦ μ_{a,t}‖_{V^r(SBE)}` over `partition`, using `μ_{a,t} − μ_{a,s} = μ_{s,t}`.
/// Pairwise norms are evaluated in parallel.
pub fn variation_of_occupation(path: &SampledPath, partition: &[f64], r: f64, sbe: &SbeParams) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(invalid("r", "must be >= 1"));
    }
    if partition.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("partition", "times must be strictly increasing"));
    }
    let n = partition.len();
    if n < 2 {
        return Ok(0.0);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let norms: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mu = occupation(path, partition[i], partition[j])?;
            Ok(sbe_norm(&SmallBallIndex::build(&mu), sbe)?.value)
        })
        .collect::<Result<_>>()?;
    let mut table = vec![0.0; n * n];
    for (&(i, j), &v) in pairs.iter().zip(&norms) {
        table[i * n + j] = v;
    }
    Ok(p_variation_with(n, |i, j| table[i * n + j], r))
}

/// Least-squares fit of `log norm = slope · log span + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn holder_exponent(spans: &[f64], norms: &[f64]) -> Result<HolderFit> {
    if spans.len() != norms.len() {
        return Err(SbeError::DimensionMismatch {
            expected: spans.len(),
            got: norms.len(),
        });
    }
    if spans.len() < 3 {
        return Err(SbeError::Degenerate("need at least 3 points".into()));
    }
    if spans.iter().chain(norms).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(SbeError::Degenerate("spans and norms must be positive".into()));
    }
    let x: Vec<f64> = spans.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(SbeError::Degenerate("all spans are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(HolderFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Max of the p-sums over all subsets of interior indices.
    fn exhaustive(values: &[f64], p: f64) -> f64 {
        let n = values.len();
        let inner = n - 2;
        let mut best: f64 = 0.0;
        for mask in 0u32..(1 << inner) {
            let mut prev = 0;
            let mut s = 0.0;
            for i in 1..n {
                if i == n - 1 || mask >> (i - 1) & 1 == 1 {
                    s += (values[i] - values[prev]).abs().powf(p);
                    prev = i;
                }
            }
            best = best.max(s);
        }
        best
    }

    #[test]
    fn small_cases() {
        assert_eq!(p_variation_real(&[0.0, 1.0, 0.0], 2.0), 2f64.sqrt());
        assert_eq!(p_variation_real(&[0.0, 1.0, 3.0, 7.5], 2.5), 7.5);
        assert_eq!(p_variation_real(&[1.0], 2.0), 0.0);
    }

    #[test]
    fn dp_matches_exhaustive_search() {
        let mut rng = seeded_rng(21);
        for _ in 0..300 {
            let n = rng.random_range(2..=12);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = rng.random_range(1.0..4.0);
            let dp = p_variation_pow(v.len(), |i, j| (v[j] - v[i]).abs(), p);
            assert_eq!(dp, exhaustive(&v, p));
        }
    }

    #[test]
    fn dyadic_cases() {
        let constant = vec![vec![0.0], vec![0.0, 0.0]];
        assert_eq!(dyadic_variation_bound(&constant, 2.0, 0.5).unwrap().bound, 0.0);
        let f: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let levels = dyadic_increments(&f, |a, b| (b - a).abs()).unwrap();
        let b = dyadic_variation_bound(&levels, 2.0, 0.5).unwrap();
        for (l, s) in b.level_sums.iter().enumerate() {
            let n = 2f64.powi(l as i32);
            assert!((s - 1.0 / n).abs() < 1e-15);
        }
        assert!(dyadic_increments(&f[..10], |a: &f64, b: &f64| (b - a).abs()).is_err());
    }

    #[test]
    fn dyadic_bound_dominates_exact_variation() {
        let mut rng = seeded_rng(4);
        for _ in 0..200 {
            let v: Vec<f64> = (0..65).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = rng.random_range(1.0..3.0);
            let eps = rng.random_range(0.1..0.9);
            let levels = dyadic_increments(&v, |a, b| (b - a).abs()).unwrap();
            let b = dyadic_variation_bound(&levels, q, eps).unwrap();
            assert!(b.bound >= p_variation_real(&v, q).powf(q) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn holder_fits() {
        let spans: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let fit = holder_exponent(&spans, &spans).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
        let half: Vec<f64> = spans.iter().map(|s| s.sqrt()).collect();
        assert!((holder_exponent(&spans, &half).unwrap().slope - 0.5).abs() < 1e-12);
        let mut rng = seeded_rng(8);
        let spans: Vec<f64> = (0..20).map(|i| 2f64.powf(-(i as f64) / 2.0)).collect();
        let noisy: Vec<f64> = spans
            .iter()
            .map(|s| s.powf(0.7) * (1.0 + rng.random_range(-0.1..0.1)))
            .collect();
        assert!((holder_exponent(&spans, &noisy).unwrap().slope - 0.7).abs() < 0.05);
        assert!(holder_exponent(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn occupation_variation() {
        let times = SampledPath::uniform_times(257, 0.0, 1.0);
        let path = SampledPath::from_fn(times, 1, |t| vec![(6.0 * t).sin()]).unwrap();
        let sbe = SbeParams::new(0.4, 2.0, 2.0)
            .with_r_range(1.0 / 64.0, 2.0)
            .with_y_box(vec![-3.0], vec![3.0], 121);
        let whole = variation_of_occupation(&path, &[0.0, 1.0], 2.0, &sbe).unwrap();
        let direct = sbe_norm(&SmallBallIndex::build(&occupation(&path, 0.0, 1.0).unwrap()), &sbe)
            .unwrap()
            .value;
        assert_eq!(whole, direct);
        let fine = variation_of_occupation(&path, &[0.0, 0.25, 0.5, 0.75, 1.0], 2.0, &sbe).unwrap();
        assert!(fine >= whole);
        let flat = SampledPath::from_fn(SampledPath::uniform_times(17, 0.0, 1.0), 1, |_| vec![0.3]).unwrap();
        let v = variation_of_occupation(&flat, &[0.0, 0.5, 1.0], 2.0, &sbe).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    proptest! {
        #[test]
        fn superadditive_over_concatenation(v in proptest::collection::vec(-1.0f64..1.0, 3..14), cut in 1usize..12, p in 1.0f64..3.0) {
            let u = cut.min(v.len() - 2);
            let whole = p_variation_real(&v, p).powf(p);
            let left = p_variation_real(&v[..=u], p).powf(p);
            let right = p_variation_real(&v[u..], p).powf(p);
            prop_assert!(whole >= (left + right) * (1.0 - 1e-12));
        }
    }
}
