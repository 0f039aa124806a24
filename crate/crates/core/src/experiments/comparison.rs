//! Besov against SBE norms on a fixed family of test measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::norms::{besov_norm, deposit_grid, sbe_norm, BesovParams, GridDensity, GridSpec, SbeParams};
use crate::occupation::occupation;
use crate::process::{gen_gaussian, GaussianSpec};
use crate::rng::child_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub spacing: f64,
    /// The grid covers `[−half_width, half_width]`.
    pub half_width: f64,
    pub blocks: usize,
    pub bm_steps: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            p: 2.0,
            q: 2.0,
            spacing: 2f64.powi(-9),
            half_width: 4.0,
            blocks: 6,
            bm_steps: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub sbe: f64,
    pub besov: f64,
    /// `besov / sbe`
    pub ratio: f64,
    /// `ratio / C`
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    /// Constant fitted on the first member.
    pub constant: f64,
    pub rows: Vec<ComparisonRow>,
    pub max_relative: f64,
    pub min_relative: f64,
    /// Every member satisfies `C/10 ≤ besov/sbe ≤ 10 C`.
    pub within_factor_10: bool,
}

fn gaussian(mean: f64, sigma: f64, mass: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| {
        let z = (x[0] - mean) / sigma;
        mass * (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

fn uniform(lo: f64, hi: f64, mass: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| if x[0] >= lo && x[0] < hi { mass / (hi - lo) } else { 0.0 }
}

/// The six test measures, all as densities on one grid.
pub fn comparison_family(cfg: &ComparisonConfig, seed: u64) -> Result<Vec<(String, GridDensity)>> {
    let cells = (2.0 * cfg.half_width / cfg.spacing).round() as usize;
    let spec = GridSpec::new(vec![-cfg.half_width], cfg.spacing, vec![cells])?;
    let mut out = vec![
        ("gaussian(0, 0.1)".to_string(), GridDensity::from_fn(spec.clone(), gaussian(0.0, 0.1, 1.0))?),
        ("gaussian(0.3, 0.05) x 0.5".to_string(), GridDensity::from_fn(spec.clone(), gaussian(0.3, 0.05, 0.5))?),
        ("uniform[-0.5, 0.5]".to_string(), GridDensity::from_fn(spec.clone(), uniform(-0.5, 0.5, 1.0))?),
        ("uniform[0, 0.25] x 0.25".to_string(), GridDensity::from_fn(spec.clone(), uniform(0.0, 0.25, 0.25))?),
    ];
    let bm = GaussianSpec::brownian(1)?;
    for k in 0..2u64 {
        let path = gen_gaussian(&bm, cfg.bm_steps, (0.0, 1.0), child_seed(seed, k))?;
        let mu = occupation(&path, 0.0, 1.0)?;
        out.push((format!("brownian occupation #{k}"), deposit_grid(&mu, &spec)?));
    }
    Ok(out)
}

/// `‖μ‖_{B^α_{q,∞}}` against `‖μ‖_{SBE^{α,p}_q}` with one constant fitted
/// on the first family member.
pub fn besov_sbe_comparison(cfg: &ComparisonConfig, seed: u64) -> Result<ComparisonReport> {
    let family = comparison_family(cfg, seed)?;
    let sbe_params = SbeParams::new(cfg.alpha, cfg.p, cfg.q);
    let besov_params = BesovParams::new(cfg.alpha, cfg.q, cfg.blocks);
    let values: Vec<(f64, f64)> = family
        .par_iter()
        .map(|(_, rho)| Ok((sbe_norm(rho, &sbe_params)?.value, besov_norm(rho, &besov_params)?.value)))
        .collect::<Result<_>>()?;
    let constant = values[0].1 / values[0].0;
    let rows: Vec<ComparisonRow> = family
        .iter()
        .zip(&values)
        .map(|((name, _), &(sbe, besov))| ComparisonRow {
            name: name.clone(),
            sbe,
            besov,
            ratio: besov / sbe,
            relative: besov / sbe / constant,
        })
        .collect();
    let max_relative = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    let min_relative = rows.iter().map(|r| r.relative).fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport {
        alpha: cfg.alpha,
        p: cfg.p,
        q: cfg.q,
        constant,
        within_factor_10: max_relative <= 10.0 && min_relative >= 0.1,
        rows,
        max_relative,
        min_relative,
    })
}
