//! Weighted second moments of occupation-measure norms against the span.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{bootstrap_slope, mean, std_error, SlopeCi};
use crate::error::{invalid, Result, SbeError};
use crate::norms::{sbe_norm, SbeParams};
use crate::occupation::{occupation, SmallBallIndex};
use crate::path::SampledPath;
use crate::process::{euler_maruyama_1d, gen_gaussian, GaussianSpec};
use crate::rng::child_seed;

/// Gaussian driver families used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessChoice {
    Brownian,
    Fbm { hurst: f64 },
}

impl ProcessChoice {
    pub fn hurst(&self) -> f64 {
        match self {
            ProcessChoice::Brownian => 0.5,
            ProcessChoice::Fbm { hurst } => *hurst,
        }
    }

    pub fn spec(&self, dim: usize) -> Result<GaussianSpec> {
        match self {
            ProcessChoice::Brownian => GaussianSpec::brownian(dim),
            ProcessChoice::Fbm { hurst } => GaussianSpec::fbm(*hurst, dim),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProcessChoice::Brownian => "brownian".into(),
            ProcessChoice::Fbm { hurst } => format!("fbm(H={hurst})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentScalingConfig {
    pub process: ProcessChoice,
    pub dim: usize,
    pub alpha: f64,
    /// Spans `t` of `μ_{0,t}`; dyadic, within `(0, 1]`.
    pub spans: Vec<f64>,
    pub n_paths: usize,
    /// Samples per path on `[0, 1]`.
    pub n_steps: usize,
    /// Smallest radius of the norm's r-grid. Defaults to the typical
    /// one-sample increment `(1/n_steps)^H`; below it the left-endpoint atoms
    /// dominate the norm.
    pub r_min: Option<f64>,
    pub per_octave: usize,
    pub resamples: usize,
    pub ci_level: f64,
    /// Levels `M` of the diagnostic events `{sup |ω| ≤ M}`.
    pub truncation: Vec<f64>,
    /// `β` is taken as `1/H − d − beta_margin`.
    pub beta_margin: f64,
}

impl Default for MomentScalingConfig {
    fn default() -> Self {
        Self {
            process: ProcessChoice::Brownian,
            dim: 1,
            alpha: 0.4,
            spans: (2..=7).rev().map(|k| 2f64.powi(-k)).collect(),
            n_paths: 200,
            n_steps: 1 << 14,
            r_min: None,
            per_octave: 8,
            resamples: 1000,
            ci_level: 0.95,
            truncation: vec![0.5, 1.0, 2.0, 4.0],
            beta_margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanMoment {
    pub span: f64,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub level: f64,
    pub fraction_inside: f64,
    /// `E[‖μ_{0,t}‖² 1{sup |ω| ≤ M}]` per span, unweighted.
    pub moments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentScalingReport {
    pub process: String,
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub m: usize,
    pub beta: f64,
    /// `δ₀ = (β − 2α)/(β + 2d)`
    pub delta0: f64,
    /// `1 + δ₀`
    pub target_slope: f64,
    /// `2 − 2H(α + d − d/q)` for a self-similar driver.
    pub self_similar_exponent: Option<f64>,
    pub points: Vec<SpanMoment>,
    pub fit: SlopeCi,
    pub truncation: Vec<TruncationRow>,
    pub n_paths: usize,
    pub n_steps: usize,
}

/// `δ₀` from `(β + 2d)(1 − δ₀) = 2(α + d)`.
pub fn delta_zero(alpha: f64, beta: f64, d: usize) -> Result<f64> {
    let d = d as f64;
    let delta0 = (beta - 2.0 * alpha) / (beta + 2.0 * d);
    let lhs = (beta + 2.0 * d) * (1.0 - delta0);
    if (lhs - 2.0 * (alpha + d)).abs() > 1e-12 * (1.0 + lhs.abs()) {
        return Err(SbeError::Degenerate(format!("delta0 identity fails: {lhs} vs {}", 2.0 * (alpha + d))));
    }
    Ok(delta0)
}

fn validate_spans(spans: &[f64]) -> Result<()> {
    if spans.is_empty() {
        return Err(invalid("spans", "empty span list"));
    }
    if spans.len() < 3 {
        return Err(invalid("spans", "need at least 3 spans for a slope"));
    }
    for &s in spans {
        let k = -s.log2();
        if !(s > 0.0 && s <= 1.0) || (k - k.round()).abs() > 1e-12 {
            return Err(invalid("spans", format!("{s} is not a dyadic span in (0, 1]")));
        }
    }
    Ok(())
}

pub(crate) struct MomentSetup {
    pub alpha: f64,
    pub dim: usize,
    pub spans: Vec<f64>,
    pub r_min: f64,
    pub per_octave: usize,
    pub resamples: usize,
    pub ci_level: f64,
    pub truncation: Vec<f64>,
    pub n_paths: usize,
}

/// `‖μ_{0,t}‖²_{SBE^{α,2}_2}` for every span, and `sup |ω|`.
fn path_norms(path: &SampledPath, alpha: f64, spans: &[f64], r_min: f64, per_octave: usize) -> Result<(Vec<f64>, f64)> {
    let mut out = Vec::with_capacity(spans.len());
    for &t in spans {
        let mu = occupation(path, 0.0, t)?;
        let index = SmallBallIndex::build(&mu);
        let diameter = mu
            .bounding_box()
            .map(|(lo, hi)| lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt())
            .unwrap_or(0.0);
        let mut params = SbeParams::new(alpha, 2.0, 2.0).with_r_range(r_min, diameter.max(4.0 * r_min));
        params.per_octave = per_octave;
        let v = sbe_norm(&index, &params)?.value;
        out.push(v * v);
    }
    Ok((out, path.sup_norm()))
}

pub(crate) fn run_moment_scaling(
    setup: &MomentSetup,
    seed: u64,
    make_path: impl Fn(usize) -> Result<SampledPath> + Sync,
) -> Result<(Vec<SpanMoment>, SlopeCi, Vec<TruncationRow>)> {
    validate_spans(&setup.spans)?;
    if setup.n_paths < 20 {
        return Err(SbeError::Degenerate(format!(
            "insufficient paths for a bootstrap interval: {} < 20",
            setup.n_paths
        )));
    }
    let per_path: Vec<(Vec<f64>, f64)> = (0..setup.n_paths)
        .into_par_iter()
        .map(|i| path_norms(&make_path(i)?, setup.alpha, &setup.spans, setup.r_min, setup.per_octave))
        .collect::<Result<_>>()?;
    let d = setup.dim as i32;
    let weighted: Vec<Vec<f64>> = per_path
        .iter()
        .map(|(norms, sup)| norms.iter().map(|n| n * (1.0 + sup).powi(-d)).collect())
        .collect();
    let points = setup
        .spans
        .iter()
        .enumerate()
        .map(|(j, &span)| {
            let col: Vec<f64> = weighted.iter().map(|w| w[j]).collect();
            SpanMoment {
                span,
                mean: mean(&col),
                std_error: std_error(&col),
            }
        })
        .collect();
    let fit = bootstrap_slope(&setup.spans, &weighted, setup.resamples, setup.ci_level, child_seed(seed, u64::MAX))?;
    let truncation = setup
        .truncation
        .iter()
        .map(|&level| {
            let inside: Vec<&(Vec<f64>, f64)> = per_path.iter().filter(|(_, sup)| *sup <= level).collect();
            let moments = (0..setup.spans.len())
                .map(|j| {
                    let col: Vec<f64> = per_path.iter().map(|(n, sup)| if *sup <= level { n[j] } else { 0.0 }).collect();
                    mean(&col)
                })
                .collect();
            TruncationRow {
                level,
                fraction_inside: inside.len() as f64 / per_path.len() as f64,
                moments,
            }
        })
        .collect();
    Ok((points, fit, truncation))
}

/// Monte Carlo estimate of `t ↦ E[‖μ_{0,t}‖²_{SBE^{α,2}_2} (1 + sup|ω|)^{−d}]`
/// and its log-log slope.
pub fn mc_moment_scaling(cfg: &MomentScalingConfig, seed: u64) -> Result<MomentScalingReport> {
    let h = cfg.process.hurst();
    let d = cfg.dim;
    let beta = 1.0 / h - d as f64 - cfg.beta_margin;
    if !(beta > 0.0) {
        return Err(invalid("process", format!("no admissible beta for H = {h}, d = {d}")));
    }
    let two_alpha = 2.0 * cfg.alpha;
    if !(cfg.alpha > 0.0) || (two_alpha - two_alpha.round()).abs() < 1e-12 {
        return Err(invalid("alpha", "need alpha > 0 with 2 alpha not an integer"));
    }
    if cfg.alpha >= beta / 2.0 {
        return Err(invalid("alpha", format!("need alpha < beta/2 = {}", beta / 2.0)));
    }
    let delta0 = delta_zero(cfg.alpha, beta, d)?;
    let spec = cfg.process.spec(d)?;
    let setup = MomentSetup {
        alpha: cfg.alpha,
        dim: d,
        spans: cfg.spans.clone(),
        r_min: cfg.r_min.unwrap_or_else(|| (1.0 / cfg.n_steps as f64).powf(h)),
        per_octave: cfg.per_octave,
        resamples: cfg.resamples,
        ci_level: cfg.ci_level,
        truncation: cfg.truncation.clone(),
        n_paths: cfg.n_paths,
    };
    let (points, fit, truncation) = run_moment_scaling(&setup, seed, |i| {
        gen_gaussian(&spec, cfg.n_steps, (0.0, 1.0), child_seed(seed, i as u64))
    })?;
    let q = 2.0;
    Ok(MomentScalingReport {
        process: cfg.process.label(),
        dim: d,
        alpha: cfg.alpha,
        p: 2.0,
        q,
        m: 1,
        beta,
        delta0,
        target_slope: 1.0 + delta0,
        self_similar_exponent: Some(2.0 - 2.0 * h * (cfg.alpha + d as f64 - d as f64 / q)),
        points,
        fit,
        truncation,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
    })
}

/// Bounded drifts for the one-dimensional SDE experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SdeDrift {
    Zero,
    /// `clamp(c · sign(x), −1, 1)`
    Sign { scale: f64 },
    /// `a sin(k x)`
    Sine { amplitude: f64, frequency: f64 },
}

impl SdeDrift {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SdeDrift::Zero => 0.0,
            SdeDrift::Sign { scale } => (scale * x.signum()).clamp(-1.0, 1.0),
            SdeDrift::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeOccupationConfig {
    pub drift: SdeDrift,
    pub sigma: f64,
    pub x0: f64,
    pub alpha: f64,
    pub spans: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Defaults to `σ (1/n_steps)^{1/2}`.
    pub r_min: Option<f64>,
    pub per_octave: usize,
    pub resamples: usize,
    pub ci_level: f64,
    /// Paths used for the `σ → 2σ` dilation check.
    pub dilation_paths: usize,
}

impl Default for SdeOccupationConfig {
    fn default() -> Self {
        Self {
            drift: SdeDrift::Sign { scale: 1.0 },
            sigma: 1.0,
            x0: 0.0,
            alpha: 0.4,
            spans: (2..=6).rev().map(|k| 2f64.powi(-k)).collect(),
            n_paths: 64,
            n_steps: 1 << 12,
            r_min: None,
            per_octave: 8,
            resamples: 1000,
            ci_level: 0.95,
            dilation_paths: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationRow {
    pub path: usize,
    /// `‖μ^{2σ}_{0,1}‖ / ‖μ^{σ}_{0,1}‖` in `SBE^{α,2}_1`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeOccupationReport {
    pub drift: SdeDrift,
    pub sigma: f64,
    pub sde_points: Vec<SpanMoment>,
    pub sde_fit: SlopeCi,
    pub baseline_points: Vec<SpanMoment>,
    pub baseline_fit: SlopeCi,
    pub ci_overlap: bool,
    pub dilation: Vec<DilationRow>,
    /// `2^{−α}`, the exact ratio for a driftless path.
    pub dilation_expected: f64,
}

/// Euler–Maruyama paths of `dX = b(X) dt + σ dB` through the moment
/// pipeline, against a Brownian baseline with the same settings.
pub fn sde_occupation_experiment(cfg: &SdeOccupationConfig, seed: u64) -> Result<SdeOccupationReport> {
    if !(cfg.sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let r_min = cfg.r_min.unwrap_or_else(|| cfg.sigma / (cfg.n_steps as f64).sqrt());
    let setup = MomentSetup {
        alpha: cfg.alpha,
        dim: 1,
        spans: cfg.spans.clone(),
        r_min,
        per_octave: cfg.per_octave,
        resamples: cfg.resamples,
        ci_level: cfg.ci_level,
        truncation: Vec::new(),
        n_paths: cfg.n_paths,
    };
    let drift = cfg.drift;
    let em = |i: usize, sigma: f64| {
        euler_maruyama_1d(
            |_, x| drift.eval(x),
            |_, _| sigma,
            cfg.x0,
            cfg.n_steps,
            (0.0, 1.0),
            child_seed(seed, i as u64),
        )
    };
    let (sde_points, sde_fit, _) = run_moment_scaling(&setup, seed, |i| em(i, cfg.sigma))?;
    let bm = GaussianSpec::brownian(1)?;
    let base_seed = child_seed(seed, 1 << 32);
    let (baseline_points, baseline_fit, _) = run_moment_scaling(&setup, base_seed, |i| {
        gen_gaussian(&bm, cfg.n_steps, (0.0, 1.0), child_seed(base_seed, i as u64))?.map_values(|v| vec![cfg.sigma * v[0]])
    })?;
    let ci_overlap = sde_fit.lo <= baseline_fit.hi && baseline_fit.lo <= sde_fit.hi;

    let norm_of = |path: &SampledPath, r_min: f64| -> Result<f64> {
        let mu = occupation(path, 0.0, 1.0)?;
        let index = SmallBallIndex::build(&mu);
        let (lo, hi) = mu.bounding_box().ok_or_else(|| SbeError::Degenerate("empty measure".into()))?;
        let mut params = SbeParams::new(cfg.alpha, 2.0, 1.0).with_r_range(r_min, (hi[0] - lo[0]).max(4.0 * r_min));
        params.per_octave = cfg.per_octave;
        Ok(sbe_norm(&index, &params)?.value)
    };
    let dilation = (0..cfg.dilation_paths)
        .into_par_iter()
        .map(|i| {
            let one = norm_of(&em(i, cfg.sigma)?, r_min)?;
            let two = norm_of(&em(i, 2.0 * cfg.sigma)?, 2.0 * r_min)?;
            Ok(DilationRow { path: i, ratio: two / one })
        })
        .collect::<Result<_>>()?;
    Ok(SdeOccupationReport {
        drift: cfg.drift,
        sigma: cfg.sigma,
        sde_points,
        sde_fit,
        baseline_points,
        baseline_fit,
        ci_overlap,
        dilation,
        dilation_expected: 2f64.powf(-cfg.alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_zero_identity() {
        let d0 = delta_zero(0.4, 1.0, 1).unwrap();
        assert!((d0 - 0.2 / 3.0).abs() < 1e-15);
        // Target shrinks to 1 as alpha approaches beta/2.
        assert!(delta_zero(0.499, 1.0, 1).unwrap() < 1e-3);
    }

    #[test]
    fn span_validation() {
        let cfg = MomentScalingConfig {
            spans: vec![],
            ..Default::default()
        };
        assert!(mc_moment_scaling(&cfg, 1).is_err());
        let cfg = MomentScalingConfig {
            spans: vec![0.3, 0.5, 1.0],
            ..Default::default()
        };
        assert!(mc_moment_scaling(&cfg, 1).is_err());
        let cfg = MomentScalingConfig {
            n_paths: 5,
            ..Default::default()
        };
        assert!(matches!(mc_moment_scaling(&cfg, 1), Err(SbeError::Degenerate(_))));
    }

    #[test]
    fn small_run_is_reproducible_and_truncation_monotone() {
        let cfg = MomentScalingConfig {
            n_paths: 24,
            n_steps: 1 << 10,
            spans: vec![0.0625, 0.125, 0.25, 0.5],
            resamples: 100,
            ..Default::default()
        };
        let a = mc_moment_scaling(&cfg, 9).unwrap();
        let b = mc_moment_scaling(&cfg, 9).unwrap();
        assert_eq!(a, b);
        for w in a.truncation.windows(2) {
            for (lo, hi) in w[0].moments.iter().zip(&w[1].moments) {
                assert!(lo <= hi && hi.is_finite());
            }
        }
        assert!(a.points.windows(2).all(|w| w[0].mean < w[1].mean));
    }

    #[test]
    fn driftless_dilation_is_exact() {
        let cfg = SdeOccupationConfig {
            drift: SdeDrift::Zero,
            n_paths: 20,
            n_steps: 1 << 9,
            spans: vec![0.125, 0.25, 0.5],
            resamples: 50,
            dilation_paths: 2,
            ..Default::default()
        };
        let r = sde_occupation_experiment(&cfg, 4).unwrap();
        for row in &r.dilation {
            assert!((row.ratio / r.dilation_expected - 1.0).abs() < 1e-9, "{}", row.ratio);
        }
    }
}
