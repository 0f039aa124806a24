//! The sewing map: from an almost-additive germ `χ_{st}` to the unique
//! additive `𝓘χ` by compensated dyadic Riemann sums.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SbeError};
use crate::path::SampledPath;
use crate::rng::seeded_rng;

type GermFn<'a> = Box<dyn Fn(f64, f64) -> Result<Vec<f64>> + Sync + 'a>;
type ControlFn<'a> = Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>;

/// `‖δχ_{sut}‖ ≤ ρ(s,u)^a σ(u,t)^b` with `a + b > 1`.
pub struct Controls<'a> {
    pub a: f64,
    pub b: f64,
    pub rho: ControlFn<'a>,
    pub sigma: ControlFn<'a>,
}

/// A two-parameter germ with values in `ℝ^dim`.
pub struct SewingGerm<'a> {
    chi: GermFn<'a>,
    dim: usize,
    controls: Option<Controls<'a>>,
}

impl<'a> SewingGerm<'a> {
    pub fn new(dim: usize, chi: impl Fn(f64, f64) -> Result<Vec<f64>> + Sync + 'a) -> Self {
        Self {
            chi: Box::new(chi),
            dim,
            controls: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        let v = (self.chi)(s, t)?;
        if v.len() != self.dim {
            return Err(SbeError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(v)
    }

    /// `δχ_{sut} = χ_{st} − χ_{su} − χ_{ut}`.
    pub fn delta(&self, s: f64, u: f64, t: f64) -> Result<Vec<f64>> {
        let (st, su, ut) = (self.eval(s, t)?, self.eval(s, u)?, self.eval(u, t)?);
        Ok((0..self.dim).map(|k| st[k] - su[k] - ut[k]).collect())
    }

    /// Attach controls and spot-check the germ condition on `probes`
    /// random triples in `span`.
    pub fn with_controls(mut self, controls: Controls<'a>, span: (f64, f64), probes: usize, seed: u64) -> Result<Self> {
        if !(controls.a + controls.b > 1.0) {
            return Err(invalid("controls", format!("need a + b > 1, got {} + {}", controls.a, controls.b)));
        }
        let mut rng = seeded_rng(seed);
        for _ in 0..probes {
            let mut p = [
                rng.random_range(span.0..span.1),
                rng.random_range(span.0..span.1),
                rng.random_range(span.0..span.1),
            ];
            p.sort_by(f64::total_cmp);
            let [s, u, t] = p;
            if !(s < u && u < t) {
                continue;
            }
            let norm = euclid(&self.delta(s, u, t)?);
            let bound = (controls.rho)(s, u).powf(controls.a) * (controls.sigma)(u, t).powf(controls.b);
            if norm > bound * (1.0 + 1e-9) + 1e-14 {
                return Err(SbeError::SewingDivergence(format!(
                    "germ condition fails at (s, u, t) = ({s}, {u}, {t}): |delta chi| = {norm:e} > {bound:e}"
                )));
            }
        }
        self.controls = Some(controls);
        Ok(self)
    }

    pub fn controls(&self) -> Option<&Controls<'a>> {
        self.controls.as_ref()
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// All dyadic levels of the sewing construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SewingReport {
    /// `sup_k ‖I^{(l+1)}(t_k) − I^{(l)}(t_k)‖` over level-`l` nodes.
    pub differences: Vec<f64>,
    /// Fitted `−log₂` of the ratio of consecutive differences.
    pub decay_rate: Option<f64>,
    /// `Σ_{l ≥ L} ‖I^{(l+1)} − I^{(l)}‖` extrapolated geometrically.
    pub tail_bound: f64,
}

pub struct SewingResult {
    /// `I^{(l)}` on the level-`l` grid, `l = 0..=L`.
    pub levels: Vec<SampledPath>,
    pub report: SewingReport,
}

impl SewingResult {
    pub fn finest(&self) -> &SampledPath {
        self.levels.last().expect("at least one level")
    }
}

/// Cumulative sums of `χ` over the uniform partition of `span` into `cells` pieces.
pub fn riemann_sums(germ: &SewingGerm, span: (f64, f64), cells: usize) -> Result<SampledPath> {
    let times = SampledPath::uniform_times(cells + 1, span.0, span.1);
    let pieces: Vec<Vec<f64>> = (0..cells)
        .into_par_iter()
        .map(|k| germ.eval(times[k], times[k + 1]))
        .collect::<Result<_>>()?;
    let d = germ.dim();
    let mut values = Vec::with_capacity((cells + 1) * d);
    values.extend(std::iter::repeat_n(0.0, d));
    let mut acc = vec![0.0; d];
    for p in &pieces {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
        values.extend_from_slice(&acc);
    }
    SampledPath::new(times, values, d)
}

fn sup_diff_on_coarse(fine: &SampledPath, coarse: &SampledPath, ratio: usize) -> f64 {
    (0..coarse.len())
        .map(|k| {
            euclid(
                &fine
                    .value(k * ratio)
                    .iter()
                    .zip(coarse.value(k))
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            )
        })
        .fold(0.0, f64::max)
}

fn report_from(diffs: Vec<f64>, base: f64) -> SewingReport {
    let n = diffs.len();
    let ratio = if n >= 2 && diffs[n - 2] > 0.0 {
        Some(diffs[n - 1] / diffs[n - 2])
    } else {
        None
    };
    let decay_rate = ratio.filter(|r| *r > 0.0).map(|r| -r.log(base));
    let tail_bound = match (diffs.last(), ratio) {
        (Some(&last), Some(r)) if r < 1.0 => last * r / (1.0 - r),
        (Some(&last), None) if last == 0.0 => 0.0,
        (Some(_), _) => f64::INFINITY,
        (None, _) => f64::INFINITY,
    };
    SewingReport {
        differences: diffs,
        decay_rate,
        tail_bound,
    }
}

fn divergence_check(germ: &SewingGerm, finest: &SampledPath, diffs: &[f64]) -> Result<()> {
    let n = diffs.len();
    if n < 3 {
        return Ok(());
    }
    let (last, before) = (diffs[n - 1], diffs[n - 3]);
    let scale = finest.sup_norm().max(1e-300);
    if last > 1e-12 * scale && last >= before {
        // Name the worst triple at the finest level.
        let t = finest.times();
        let mut worst = (0.0, 0usize);
        for k in 0..(t.len() - 1) / 2 {
            let v = euclid(&germ.delta(t[2 * k], t[2 * k + 1], t[2 * k + 2])?);
            if v > worst.0 {
                worst = (v, k);
            }
        }
        let k = worst.1;
        return Err(SbeError::SewingDivergence(format!(
            "dyadic differences stopped decaying ({before:e} -> {last:e}); worst triple ({}, {}, {}) with |delta chi| = {:e}",
            t[2 * k],
            t[2 * k + 1],
            t[2 * k + 2],
            worst.0
        )));
    }
    Ok(())
}

/// Dyadic sewing on `span` up to `level`.
pub fn sewing_integrate(germ: &SewingGerm, span: (f64, f64), level: usize) -> Result<SewingResult> {
    if !(span.1 > span.0) {
        return Err(SbeError::EmptyInterval { s: span.0, t: span.1 });
    }
    if level > 30 {
        return Err(invalid("level", "at most 30"));
    }
    let levels: Vec<SampledPath> = (0..=level)
        .map(|l| riemann_sums(germ, span, 1 << l))
        .collect::<Result<_>>()?;
    let diffs: Vec<f64> = levels
        .windows(2)
        .map(|w| sup_diff_on_coarse(&w[1], &w[0], 2))
        .collect();
    if level >= 1 {
        divergence_check(germ, &levels[level], &diffs)?;
    }
    Ok(SewingResult {
        levels,
        report: report_from(diffs, 2.0),
    })
}

/// The same construction on uniform triadic partitions, `3^l` cells.
pub fn sewing_integrate_triadic(germ: &SewingGerm, span: (f64, f64), level: usize) -> Result<SewingResult> {
    if !(span.1 > span.0) {
        return Err(SbeError::EmptyInterval { s: span.0, t: span.1 });
    }
    if level > 19 {
        return Err(invalid("level", "at most 19"));
    }
    let levels: Vec<SampledPath> = (0..=level)
        .map(|l| riemann_sums(germ, span, 3usize.pow(l as u32)))
        .collect::<Result<_>>()?;
    let diffs: Vec<f64> = levels
        .windows(2)
        .map(|w| sup_diff_on_coarse(&w[1], &w[0], 3))
        .collect();
    Ok(SewingResult {
        levels,
        report: report_from(diffs, 3.0),
    })
}
