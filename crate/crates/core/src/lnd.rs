//! Local non-determinism diagnostics for Gaussian increment models.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SbeError};
use crate::process::{GaussianKind, GaussianSpec};
use crate::rng::child_rng;

/// A Gaussian process with isotropic independent coordinates together
/// with a nominal Hurst exponent.
#[derive(Debug, Clone)]
pub struct GaussianIncrementModel {
    spec: GaussianSpec,
    hurst: f64,
}

impl GaussianIncrementModel {
    pub fn new(spec: GaussianSpec, hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(invalid("hurst", format!("{hurst} not in (0, 1)")));
        }
        Ok(Self { spec, hurst })
    }

    pub fn brownian(dim: usize) -> Result<Self> {
        Self::new(GaussianSpec::brownian(dim)?, 0.5)
    }

    pub fn fbm(hurst: f64, dim: usize) -> Result<Self> {
        Self::new(GaussianSpec::fbm(hurst, dim)?, hurst)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }

    /// `Cov(ω_b − ω_a, ω_d − ω_c)` for one coordinate.
    pub fn increment_covariance(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        match self.spec.kind() {
            GaussianKind::BrownianMotion => {
                let (lo1, hi1) = (a.min(b), a.max(b));
                let (lo2, hi2) = (c.min(d), c.max(d));
                let overlap = (hi1.min(hi2) - lo1.max(lo2)).max(0.0);
                if (b - a) * (d - c) < 0.0 {
                    -overlap
                } else {
                    overlap
                }
            }
            GaussianKind::FractionalBrownian { hurst } => {
                let h2 = 2.0 * hurst;
                let f = |x: f64| x.abs().powf(h2);
                0.5 * ((f(d - a) + f(c - b)) - (f(c - a) + f(d - b)))
            }
            GaussianKind::CustomCovariance(_) => {
                let r = |s, t| self.spec.covariance(s, t);
                (r(b, d) - r(b, c)) - (r(a, d) - r(a, c))
            }
        }
    }

    /// `V(s, t) = Var(ω_t − ω_s)` for one coordinate.
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        match self.spec.kind() {
            GaussianKind::BrownianMotion => (t - s).abs(),
            GaussianKind::FractionalBrownian { hurst } => (t - s).abs().powf(2.0 * hurst),
            GaussianKind::CustomCovariance(_) => self.increment_covariance(s, t, s, t),
        }
    }

    /// `V(s, s + u)`, exact in `u` for stationary-increment models even
    /// when `s + u` rounds to `s`.
    pub fn lag_variance(&self, s: f64, u: f64) -> f64 {
        match self.spec.kind() {
            GaussianKind::BrownianMotion => u.abs(),
            GaussianKind::FractionalBrownian { hurst } => u.abs().powf(2.0 * hurst),
            GaussianKind::CustomCovariance(_) => self.increment_variance(s, s + u),
        }
    }

    fn span_power(&self, h: f64) -> f64 {
        if self.hurst == 0.5 {
            h.abs()
        } else {
            h.abs().powf(2.0 * self.hurst)
        }
    }
}

/// `min V(s,t) / |t−s|^{2H}` over all pairs of distinct probe times.
pub fn increment_lower_bound(model: &GaussianIncrementModel, probes: &[f64]) -> Result<f64> {
    if probes.len() < 2 {
        return Err(SbeError::Degenerate("need at least two probe times".into()));
    }
    let mut best = f64::INFINITY;
    for (i, &s) in probes.iter().enumerate() {
        for &t in &probes[i + 1..] {
            if s == t {
                continue;
            }
            let v = model.increment_variance(s, t);
            if v < 0.0 || !v.is_finite() {
                return Err(SbeError::NotPositiveSemidefinite { time: t, pivot: v });
            }
            best = best.min(v / model.span_power(t - s));
        }
    }
    Ok(best)
}

/// `Var(Σ x_k · ω_{s_k s_{k+1}}) / Σ ‖x_k‖² |s_{k+1} − s_k|^{2H}`,
/// the variance taken exactly from the covariance.
pub fn lnd_ratio(model: &GaussianIncrementModel, times: &[f64], xs: &[Vec<f64>]) -> Result<f64> {
    let n = times.len();
    if n < 2 {
        return Err(invalid("times", "need at least two times"));
    }
    if xs.len() != n - 1 {
        return Err(SbeError::DimensionMismatch {
            expected: n - 1,
            got: xs.len(),
        });
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    let d = model.dim();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(SbeError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut var = 0.0;
    let mut denom = 0.0;
    for k in 0..n - 1 {
        let (a, b) = (times[k], times[k + 1]);
        let mut row = 0.0;
        for l in 0..n - 1 {
            let c = model.increment_covariance(a, b, times[l], times[l + 1]);
            row += dot(&xs[k], &xs[l]) * c;
        }
        var += row;
        denom += dot(&xs[k], &xs[k]) * model.span_power(b - a);
    }
    if denom == 0.0 {
        return Err(SbeError::Degenerate("all x_k vanish".into()));
    }
    if !(var >= -1e-12 * denom) {
        return Err(SbeError::NotPositiveSemidefinite {
            time: times[0],
            pivot: var,
        });
    }
    Ok(var / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LndEstimate {
    pub n: usize,
    pub trials: usize,
    pub min_ratio: f64,
    /// Half the minimum ratio: the empirical `c_n`.
    pub c_n: f64,
    pub worst_times: Vec<f64>,
}

/// Minimize [`lnd_ratio`] over `trials` random configurations: `n` sorted
/// uniform times in `window` and standard Gaussian directions normalized
/// to unit length. Trials run in parallel batches with derived seeds.
pub fn lnd_constant_estimate(
    model: &GaussianIncrementModel,
    n: usize,
    trials: usize,
    window: (f64, f64),
    seed: u64,
) -> Result<LndEstimate> {
    if n < 2 || trials == 0 {
        return Err(invalid("n", "need n >= 2 and at least one trial"));
    }
    const BATCH: usize = 256;
    let d = model.dim();
    let batches = trials.div_ceil(BATCH);
    let results: Vec<(f64, Vec<f64>)> = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<(f64, Vec<f64>)> {
            let mut rng = child_rng(seed, b as u64);
            let mut best = (f64::INFINITY, Vec::new());
            for _ in 0..BATCH.min(trials - b * BATCH) {
                let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(window.0..window.1)).collect();
                times.sort_by(f64::total_cmp);
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    continue;
                }
                let xs: Vec<Vec<f64>> = (0..n - 1)
                    .map(|_| {
                        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        v.into_iter().map(|x| x / norm).collect()
                    })
                    .collect();
                let r = lnd_ratio(model, &times, &xs)?;
                if r < best.0 {
                    best = (r, times);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let (min_ratio, worst_times) = results
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::INFINITY, Vec::new()));
    Ok(LndEstimate {
        n,
        trials,
        min_ratio,
        c_n: min_ratio / 2.0,
        worst_times,
    })
}

/// `sup_u |He_j(u) e^{−u²/2}|` for the probabilists' Hermite polynomial.
pub fn hermite_function_max(j: usize) -> f64 {
    const CACHED: usize = 16;
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    if j < CACHED {
        TABLE.get_or_init(|| (0..CACHED).map(search_hermite_max).collect())[j]
    } else {
        search_hermite_max(j)
    }
}

fn search_hermite_max(j: usize) -> f64 {
    let f = |u: f64| {
        let (mut h0, mut h1) = (1.0, u);
        if j == 0 {
            return (-0.5 * u * u).exp();
        }
        for m in 1..j {
            let h2 = u * h1 - m as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
        (h1 * (-0.5 * u * u).exp()).abs()
    };
    let hi = 2.0 * ((j + 1) as f64).sqrt() + 4.0;
    let steps = 4000;
    let du = hi / steps as f64;
    let (mut best, mut at) = (0.0, 0.0);
    for i in 0..=steps {
        let u = i as f64 * du;
        let v = f(u);
        if v > best {
            best = v;
            at = u;
        }
    }
    // Golden-section refinement around the grid maximum.
    let (mut a, mut b) = ((at - du).max(0.0), at + du);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if f(c) > f(e) {
            b = e;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

/// Homogeneous order-`n` seminorm of the `N(0, σ² I_d)` density:
/// `max_{|m| = n} sup |∂^m ν|`.
fn integer_order_seminorm(sigma: f64, d: usize, n: usize) -> f64 {
    let maxima: Vec<f64> = (0..=n).map(hermite_function_max).collect();
    // Max of Π M_{m_i} over compositions of n into d parts.
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    best[0] = 0.0;
    for _ in 0..d {
        let mut next = vec![f64::NEG_INFINITY; n + 1];
        for (used, &b) in best.iter().enumerate() {
            if b == f64::NEG_INFINITY {
                continue;
            }
            for m in 0..=n - used {
                next[used + m] = next[used + m].max(b + maxima[m].ln());
            }
        }
        best = next;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    best[n].exp() * two_pi.powf(-(d as f64) / 2.0) * sigma.powf(-((n + d) as f64))
}

/// `‖ν_{st}‖_{C^β}` estimate for the increment density `N(0, V(s,t) I_d)`:
/// the homogeneous top-order seminorm, with fractional orders obtained by
/// geometric interpolation between the neighbouring integer orders.
/// Scales exactly as `σ^{−(β+d)}`.
pub fn gaussian_increment_cbeta(model: &GaussianIncrementModel, s: f64, t: f64, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(invalid("beta", "must be nonnegative"));
    }
    lag_cbeta(model, s, t - s, beta)
}

fn lag_cbeta(model: &GaussianIncrementModel, s: f64, u: f64, beta: f64) -> Result<f64> {
    let v = model.lag_variance(s, u);
    if !(v > 0.0) {
        return Err(SbeError::Degenerate(format!("increment variance {v} at s = {s}, lag {u}")));
    }
    Ok(gaussian_cbeta(v.sqrt(), model.dim(), beta))
}

/// [`gaussian_increment_cbeta`] for a given standard deviation.
pub fn gaussian_cbeta(sigma: f64, d: usize, beta: f64) -> f64 {
    let lo = beta.floor() as usize;
    let theta = beta - lo as f64;
    let a = integer_order_seminorm(sigma, d, lo);
    if theta == 0.0 {
        a
    } else {
        let b = integer_order_seminorm(sigma, d, lo + 1);
        a.powf(1.0 - theta) * b.powf(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnuReport {
    pub beta: f64,
    /// Diagonal singularity exponent `γ` fitted from the integrand.
    pub singularity_exponent: f64,
    /// `(|J|, ∬_{J×J} ‖ν_{st}‖_{C^β})` for successively halved `J`.
    pub integrals: Vec<(f64, f64)>,
    /// Least-squares slope of `log ∬` against `log |J|`.
    pub growth_exponent: f64,
    /// `max ∬ / |J|`, the constant in the linear bound on the probed range.
    pub c_nu: f64,
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn gauss_legendre(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * f(m + h * x)?;
    }
    Ok(acc * h)
}

/// `∫_0^L g(u) du` for `g` with an integrable power singularity at 0:
/// Gauss–Legendre on dyadically graded panels, with the tail below the
/// last panel extrapolated from the panel ratio. Returns the integral and
/// the ratio of consecutive panel contributions near 0.
fn graded_integral(g: &impl Fn(f64) -> Result<f64>, len: f64, panels: usize) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut contributions = Vec::with_capacity(panels);
    for j in 0..panels {
        let hi = len * 0.5f64.powi(j as i32);
        let c = gauss_legendre(g, hi / 2.0, hi)?;
        contributions.push(c);
        total += c;
    }
    let ratio = contributions[panels - 1] / contributions[panels - 2];
    if !(ratio < 0.999) {
        return Err(SbeError::Divergent(format!(
            "panel contributions stop decaying near the diagonal (ratio {ratio:.4})"
        )));
    }
    Ok((total + contributions[panels - 1] * ratio / (1.0 - ratio), ratio))
}

/// `∬_{J×J} ‖ν_{st}‖_{C^β} ds dt` over `J = [a, b]`, integrating the
/// inner variable `u = t − s` on graded panels towards the diagonal.
pub fn cnu_integral(model: &GaussianIncrementModel, beta: f64, a: f64, b: f64, panels: usize) -> Result<(f64, f64)> {
    if !(b > a) {
        return Err(SbeError::EmptyInterval { s: a, t: b });
    }
    let panels = panels.max(4);
    let outer = |v: f64| -> Result<f64> {
        let s = b - v;
        let g = |u: f64| lag_cbeta(model, s, u, beta);
        Ok(graded_integral(&g, v, panels)?.0)
    };
    // The outer integrand vanishes like a power at s = b, so it is graded too.
    let (total, _) = graded_integral(&outer, b - a, panels)?;
    let g = |u: f64| lag_cbeta(model, a, u, beta);
    let (_, ratio) = graded_integral(&g, b - a, panels)?;
    Ok((2.0 * total, ratio))
}

/// Growth of `∬_{J×J} ‖ν_{st}‖_{C^β}` in `|J|` for `J = [a, a + |J|/2^m]`,
/// `m < refinements`. Divergence near the diagonal is an error.
pub fn cnu_linearity(model: &GaussianIncrementModel, beta: f64, j: (f64, f64), refinements: usize) -> Result<CnuReport> {
    if refinements < 3 {
        return Err(invalid("refinements", "need at least 3 interval lengths"));
    }
    let gamma_nominal = model.hurst() * (beta + model.dim() as f64);
    if gamma_nominal >= 1.0 {
        return Err(SbeError::Divergent(format!(
            "(beta + d) H = {gamma_nominal} >= 1, the diagonal singularity is not integrable"
        )));
    }
    let len = j.1 - j.0;
    let mut integrals = Vec::with_capacity(refinements);
    let mut ratio = 0.0;
    for m in 0..refinements {
        let l = len * 0.5f64.powi(m as i32);
        let (v, r) = cnu_integral(model, beta, j.0, j.0 + l, 40)?;
        ratio = r;
        integrals.push((l, v));
    }
    let spans: Vec<f64> = integrals.iter().map(|x| x.0).collect();
    let vals: Vec<f64> = integrals.iter().map(|x| x.1).collect();
    let fit = crate::norms::holder_exponent(&spans, &vals)?;
    let c_nu = integrals.iter().map(|(l, v)| v / l).fold(0.0, f64::max);
    Ok(CnuReport {
        beta,
        singularity_exponent: 1.0 + ratio.log2(),
        integrals,
        growth_exponent: fit.slope,
        c_nu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRegion {
    /// `1/p + (α − d/q) H < 1 − dH`
    pub first: bool,
    pub first_slack: f64,
    /// `α < (1/H − d) · min(1/2, 1/q′)`
    pub second: bool,
    pub second_slack: f64,
    /// `H < 1/d`, the standing hypothesis.
    pub hurst_admissible: bool,
    /// `p ≤ q`, reported on its own.
    pub p_le_q: bool,
    pub satisfied: bool,
}

pub fn lnd_param_region(hurst: f64, d: usize, alpha: f64, p: f64, q: f64) -> Result<ParamRegion> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(invalid("hurst", format!("{hurst} not in (0, 1)")));
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(invalid("p", "p and q must lie in [1, inf]"));
    }
    let d = d as f64;
    let first_slack = (1.0 - d * hurst) - (1.0 / p + (alpha - d / q) * hurst);
    let inv_q_conj = 1.0 - 1.0 / q;
    let second_slack = (1.0 / hurst - d) * inv_q_conj.min(0.5) - alpha;
    let hurst_admissible = hurst < 1.0 / d;
    Ok(ParamRegion {
        first: first_slack > 0.0,
        first_slack,
        second: second_slack > 0.0,
        second_slack,
        hurst_admissible,
        p_le_q: p <= q,
        satisfied: first_slack > 0.0 && second_slack > 0.0 && hurst_admissible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::holder_exponent;
    use crate::process::Covariance;
    use std::sync::Arc;

    fn grid(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn lower_bounds() {
        let probes = grid(20, 0.0, 1.0);
        let bm = GaussianIncrementModel::brownian(1).unwrap();
        assert_eq!(increment_lower_bound(&bm, &probes).unwrap(), 1.0);
        let fbm = GaussianIncrementModel::fbm(0.3, 1).unwrap();
        assert!((increment_lower_bound(&fbm, &probes).unwrap() - 1.0).abs() < 1e-12);
        // Stationary Ornstein–Uhlenbeck: V = 2(1 − e^{−h}).
        let cov: Covariance = Arc::new(|s: f64, t: f64| (-(t - s).abs()).exp());
        let ou = GaussianIncrementModel::new(GaussianSpec::custom(cov, 1, (0.0, 2.0)).unwrap(), 0.5).unwrap();
        let t = 2.0;
        let got = increment_lower_bound(&ou, &grid(21, 0.0, t)).unwrap();
        let closed = 2.0 * (1.0 - (-t).exp()) / t;
        assert!((got - closed).abs() < 1e-12);
        assert!(got >= (-t).exp());
    }

    #[test]
    fn brownian_ratio_is_one() {
        let bm = GaussianIncrementModel::brownian(2).unwrap();
        let est = lnd_constant_estimate(&bm, 5, 2000, (0.1, 1.0), 3).unwrap();
        assert_eq!(est.min_ratio, 1.0);
        let r = lnd_ratio(&bm, &[0.1, 0.35, 0.7], &[vec![0.3, -1.0], vec![2.0, 0.5]]).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn fbm_ratio_is_bounded_below() {
        for &h in &[0.25, 0.75] {
            let m = GaussianIncrementModel::fbm(h, 1).unwrap();
            let est = lnd_constant_estimate(&m, 3, 4000, (0.1, 1.0), 5).unwrap();
            assert!(est.min_ratio > 0.05, "H={h}: {}", est.min_ratio);
        }
    }

    #[test]
    fn degenerate_directions_rejected() {
        let m = GaussianIncrementModel::fbm(0.75, 1).unwrap();
        assert!(matches!(
            lnd_ratio(&m, &[0.1, 0.2, 0.3], &[vec![0.0], vec![0.0]]),
            Err(SbeError::Degenerate(_))
        ));
    }

    #[test]
    fn two_point_ratio_matches_lower_bound() {
        let m = GaussianIncrementModel::fbm(0.75, 2).unwrap();
        let probes = [0.2, 0.9];
        let lb = increment_lower_bound(&m, &probes).unwrap();
        let r = lnd_ratio(&m, &probes, &[vec![0.6, 0.8]]).unwrap();
        assert!(r >= lb * (1.0 - 1e-12));
    }

    #[test]
    fn hermite_maxima() {
        assert_eq!(hermite_function_max(0), 1.0);
        // |u e^{−u²/2}| peaks at u = 1.
        assert!((hermite_function_max(1) - (-0.5f64).exp()).abs() < 1e-14);
        // He_2 = u² − 1 attains |−1| at u = 0.
        assert!((hermite_function_max(2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cbeta_values_and_scaling() {
        let two_pi = 2.0 * std::f64::consts::PI;
        for d in 1..=3 {
            let sigma: f64 = 0.7;
            let peak = (two_pi * sigma * sigma).powf(-(d as f64) / 2.0);
            assert!((gaussian_cbeta(sigma, d, 0.0) / peak - 1.0).abs() < 1e-14);
            let ratio = gaussian_cbeta(sigma, d, 1.0) / gaussian_cbeta(2.0 * sigma, d, 1.0);
            assert!((ratio - 2f64.powi(d as i32 + 1)).abs() < 1e-9);
        }
        for &h in &[0.25, 0.5, 0.75] {
            let m = GaussianIncrementModel::fbm(h, 2).unwrap();
            for &beta in &[0.0, 1.0, 0.5] {
                let spans: Vec<f64> = (0..10).map(|i| 2f64.powi(-i)).collect();
                let vals: Vec<f64> = spans
                    .iter()
                    .map(|&u| gaussian_increment_cbeta(&m, 0.0, u, beta).unwrap())
                    .collect();
                let slope = holder_exponent(&spans, &vals).unwrap().slope;
                assert!((slope + h * (beta + 2.0)).abs() < 0.03, "H={h} beta={beta} slope={slope}");
            }
        }
    }

    #[test]
    fn cnu_integral_matches_closed_form() {
        let (h, beta) = (0.3, 0.5);
        let m = GaussianIncrementModel::fbm(h, 1).unwrap();
        let gamma = h * (beta + 1.0);
        let k = gaussian_cbeta(1.0, 1, beta);
        for &l in &[1.0, 0.5] {
            let (got, _) = cnu_integral(&m, beta, 0.0, l, 40).unwrap();
            let closed = k * 2.0 * l.powf(2.0 - gamma) / ((1.0 - gamma) * (2.0 - gamma));
            assert!((got / closed - 1.0).abs() < 1e-6, "{got} vs {closed}");
        }
        let rep = cnu_linearity(&m, beta, (0.0, 1.0), 5).unwrap();
        assert!((rep.singularity_exponent - gamma).abs() < 1e-6);
        assert!((rep.growth_exponent - (2.0 - gamma)).abs() < 1e-6);
        // The linear bound ∬ ≤ C_ν |J| holds on |J| ≤ 1.
        for (l, v) in &rep.integrals {
            assert!(*v <= rep.c_nu * l * (1.0 + 1e-12));
        }
        // Halving J halves the integral within the power-law factor.
        let r = rep.integrals[1].1 / rep.integrals[0].1;
        assert!((r - 0.5f64.powf(2.0 - gamma)).abs() < 1e-6);
    }

    #[test]
    fn cnu_divergence_is_reported() {
        let m = GaussianIncrementModel::fbm(0.5, 1).unwrap();
        assert!(matches!(cnu_linearity(&m, 1.0, (0.0, 1.0), 4), Err(SbeError::Divergent(_))));
        assert!(matches!(cnu_integral(&m, 1.0, 0.0, 1.0, 30), Err(SbeError::Divergent(_))));
    }

    #[test]
    fn param_region() {
        let r = lnd_param_region(0.5, 1, 0.4, 1e9, 2.0).unwrap();
        assert!(r.first && r.second && r.satisfied);
        assert!((r.second_slack - 0.1).abs() < 1e-12);
        for &q in &[1.0, 2.0, 5.0] {
            assert!(lnd_param_region(0.3, 1, 0.0, 2.0, q).unwrap().second_slack >= 0.0);
        }
        let b = lnd_param_region(0.5, 1, 0.5, 1e9, 2.0).unwrap();
        assert!(!b.second && b.second_slack == 0.0);
        let hi = lnd_param_region(0.6, 2, 0.1, 2.0, 2.0).unwrap();
        assert!(!hi.hurst_admissible && !hi.satisfied);
    }
}
