//! Reparametrization invariance and perturbation stability of the
//! occupation-measure variation norms.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SbeError};
use crate::norms::{
    besov_norm_values, deposit_grid, p_variation, p_variation_with, variation_of_occupation, BesovParams, GridSpec,
    SbeParams,
};
use crate::occupation::occupation;
use crate::path::SampledPath;
use crate::process::{gen_gaussian, perturb, reparametrize, GaussianSpec};
use crate::rng::{child_rng, child_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparamReport {
    /// `‖μ_{a,·}‖_{V^r(SBE)}` of the original path.
    pub original: f64,
    /// The same for `ω ∘ φ`, on the pulled-back partition.
    pub transformed: f64,
    pub ratio: f64,
    /// Smallest and largest difference quotient of `φ`.
    pub lipschitz: (f64, f64),
}

fn uniform_partition(a: f64, b: f64, cells: usize) -> Vec<f64> {
    SampledPath::uniform_times(cells + 1, a, b)
}

/// Compare `V^r(SBE)` of `t ↦ μ_{a,t}` for `ω` and `ω ∘ φ`. The partition of
/// `ω`'s span is uniform with `cells` cells; `ω ∘ φ` uses its preimage.
pub fn reparam_experiment(path: &SampledPath, phi: &SampledPath, r: f64, sbe: &SbeParams, cells: usize) -> Result<ReparamReport> {
    if cells == 0 {
        return Err(invalid("cells", "need at least one cell"));
    }
    let moved = reparametrize(path, phi)?;
    let inverse = SampledPath::new(phi.values().to_vec(), phi.times().to_vec(), 1)?;
    let partition = uniform_partition(path.start(), path.end(), cells);
    let mut pulled: Vec<f64> = partition.iter().map(|&t| inverse.interpolate(t)[0]).collect();
    pulled[0] = phi.start();
    pulled[cells] = phi.end();
    let original = variation_of_occupation(path, &partition, r, sbe)?;
    let transformed = variation_of_occupation(&moved, &pulled, r, sbe)?;
    let slopes = phi
        .times()
        .windows(2)
        .zip(phi.values().windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]));
    let lipschitz = slopes.fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s), hi.max(s)));
    Ok(ReparamReport {
        original,
        transformed,
        ratio: transformed / original,
        lipschitz,
    })
}

/// Settings of the Besov-valued variation norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSettings {
    pub r: f64,
    pub r1: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Integrability of the Besov norms.
    pub p: f64,
    pub blocks: usize,
    pub spacing: f64,
    pub cells: usize,
}

impl Default for ShiftSettings {
    fn default() -> Self {
        Self {
            r: 2.0,
            r1: 1.0,
            gamma: 0.75,
            alpha: 0.4,
            p: 2.0,
            blocks: 5,
            spacing: 2f64.powi(-9),
            cells: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    /// `‖μ^f_{a,·} − μ^g_{a,·}‖_{V^r(B^{α−γ−1})}`
    pub difference: f64,
    /// `‖μ_{a,·}‖_{V^r(B^α)}`
    pub base: f64,
    pub f_minus_g_variation: f64,
    pub f_minus_g_sup: f64,
    pub g_variation: f64,
    /// `difference / [base · (‖f−g‖_{V^{r₁}} + (1 + ‖g‖_{V^{r₁}}) ‖f−g‖_∞)]`
    pub bound_ratio: f64,
}

/// Per-cell deposits of `μ` between consecutive partition times.
fn cell_deposits(path: &SampledPath, partition: &[f64], grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    partition
        .windows(2)
        .map(|w| Ok(deposit_grid(&occupation(path, w[0], w[1])?, grid)?.values().to_vec()))
        .collect()
}

/// `V^r` of `t ↦ ν_{a,t}` in a Besov space, where `ν_{t_i,t_j}` is the sum
/// of cell deposits `i..j`.
fn besov_variation(cells: &[Vec<f64>], grid: &GridSpec, params: &BesovParams, r: f64) -> Result<f64> {
    let n = cells.len() + 1;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let norms: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut acc = vec![0.0; grid.len()];
            for c in &cells[i..j] {
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += v;
                }
            }
            Ok(besov_norm_values(grid, &acc, params)?.value)
        })
        .collect::<Result<_>>()?;
    let mut table = vec![0.0; n * n];
    for (&(i, j), &v) in pairs.iter().zip(&norms) {
        table[i * n + j] = v;
    }
    Ok(p_variation_with(n, |i, j| table[i * n + j], r))
}

fn path_variation(path: &SampledPath, r: f64) -> f64 {
    let d = path.dim();
    let points: Vec<&[f64]> = (0..path.len()).map(|i| path.value(i)).collect();
    p_variation(
        &points,
        |a, b| (0..d).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>().sqrt(),
        r,
    )
}

/// Evaluate both sides of the perturbation estimate for one pair `(f, g)`.
pub fn shift_experiment(path: &SampledPath, f: &SampledPath, g: &SampledPath, settings: &ShiftSettings) -> Result<ShiftReport> {
    let r_conj = settings.r / (settings.r - 1.0);
    if !(settings.r > 1.0) || !(settings.r1 >= 1.0) {
        return Err(invalid("r", "need r > 1 and r1 >= 1"));
    }
    if !(settings.gamma > settings.r1 / r_conj && settings.gamma <= 1.0) {
        return Err(invalid("gamma", format!("need r1/r' = {} < gamma <= 1", settings.r1 / r_conj)));
    }
    let wf = perturb(path, f)?;
    let wg = perturb(path, g)?;
    let d = path.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in [path, &wf, &wg] {
        for i in 0..p.len() {
            for k in 0..d {
                lo[k] = lo[k].min(p.value(i)[k]);
                hi[k] = hi[k].max(p.value(i)[k]);
            }
        }
    }
    let grid = GridSpec::covering(&lo, &hi, settings.spacing, 0.5)?;
    let partition = uniform_partition(path.start(), path.end(), settings.cells);
    let base_cells = cell_deposits(path, &partition, &grid)?;
    let fc = cell_deposits(&wf, &partition, &grid)?;
    let gc = cell_deposits(&wg, &partition, &grid)?;
    let diff_cells: Vec<Vec<f64>> = fc
        .iter()
        .zip(&gc)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let mk = |alpha: f64| BesovParams::new(alpha, settings.p, settings.blocks);
    let base = besov_variation(&base_cells, &grid, &mk(settings.alpha), settings.r)?;
    let difference = besov_variation(&diff_cells, &grid, &mk(settings.alpha - settings.gamma - 1.0), settings.r)?;
    let fg = f.map_values(|v| v.to_vec())?;
    let fg = SampledPath::new(
        fg.times().to_vec(),
        (0..fg.len())
            .flat_map(|i| {
                let gv = g.interpolate(fg.times()[i]);
                fg.value(i).iter().zip(gv).map(|(a, b)| a - b).collect::<Vec<_>>()
            })
            .collect(),
        d,
    )?;
    let f_minus_g_variation = path_variation(&fg, settings.r1);
    let f_minus_g_sup = fg.sup_norm();
    let g_variation = path_variation(g, settings.r1);
    let denom = base * (f_minus_g_variation + (1.0 + g_variation) * f_minus_g_sup);
    Ok(ShiftReport {
        difference,
        base,
        f_minus_g_variation,
        f_minus_g_sup,
        g_variation,
        bound_ratio: if denom > 0.0 { difference / denom } else { 0.0 },
    })
}

/// Random smooth perturbation `t ↦ Σ_j a_j sin(2π k_j t + φ_j)` per coordinate.
pub fn random_smooth_path(dim: usize, n: usize, span: (f64, f64), amplitude: f64, seed: u64) -> Result<SampledPath> {
    let mut rng = child_rng(seed, 0);
    let modes: Vec<(f64, f64, f64)> = (0..3 * dim)
        .map(|_| {
            (
                amplitude * rng.random_range(0.2..1.0),
                rng.random_range(1..4) as f64,
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let len = span.1 - span.0;
    SampledPath::from_fn(SampledPath::uniform_times(n, span.0, span.1), dim, |t| {
        (0..dim)
            .map(|k| {
                modes[3 * k..3 * k + 3]
                    .iter()
                    .map(|(a, f, p)| a * (std::f64::consts::TAU * f * (t - span.0) / len + p).sin())
                    .sum()
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceConfig {
    pub n_steps: usize,
    pub sbe_alpha: f64,
    pub sbe_r_min: f64,
    pub r: f64,
    pub cells: usize,
    pub pairs: usize,
    pub amplitude: f64,
    pub shift: ShiftSettings,
}

impl Default for InvarianceConfig {
    fn default() -> Self {
        Self {
            n_steps: 1 << 12,
            sbe_alpha: 0.3,
            sbe_r_min: 2f64.powi(-8),
            r: 2.0,
            cells: 8,
            pairs: 10,
            amplitude: 0.3,
            shift: ShiftSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub identity: ReparamReport,
    pub nontrivial: ReparamReport,
    /// Difference norm for `f = g`.
    pub equal_pair_difference: f64,
    pub family: Vec<ShiftReport>,
    /// Largest over smallest bound ratio across the family.
    pub family_spread: f64,
}

fn sbe_for(cfg: &InvarianceConfig, path: &SampledPath) -> SbeParams {
    let sup = path.sup_norm();
    SbeParams::new(cfg.sbe_alpha, 2.0, 2.0).with_r_range(cfg.sbe_r_min, 2.0 * sup.max(cfg.sbe_r_min * 4.0))
}

/// Identity and smooth bi-Lipschitz reparametrizations, the `f = g` case,
/// and the perturbation bound ratio across random smooth pairs.
pub fn invariance_suite(cfg: &InvarianceConfig, seed: u64) -> Result<InvarianceReport> {
    if cfg.pairs < 2 {
        return Err(invalid("pairs", "need at least 2 pairs"));
    }
    let path = gen_gaussian(&GaussianSpec::brownian(1)?, cfg.n_steps, (0.0, 1.0), seed)?;
    let sbe = sbe_for(cfg, &path);
    let identity_phi = SampledPath::new(path.times().to_vec(), path.times().to_vec(), 1)?;
    let identity = reparam_experiment(&path, &identity_phi, cfg.r, &sbe, cfg.cells)?;
    let tau = std::f64::consts::TAU;
    let bent = SampledPath::from_fn(SampledPath::uniform_times(cfg.n_steps, 0.0, 1.0), 1, |u| {
        vec![u + 0.3 * (tau * u).sin() / tau]
    })?;
    let nontrivial = reparam_experiment(&path, &bent, cfg.r, &sbe, cfg.cells)?;

    let span = (0.0, 1.0);
    let g0 = random_smooth_path(1, 257, span, cfg.amplitude, child_seed(seed, 1))?;
    let equal_pair_difference = shift_experiment(&path, &g0, &g0, &cfg.shift)?.difference;
    let family: Vec<ShiftReport> = (0..cfg.pairs)
        .map(|i| {
            let f = random_smooth_path(1, 257, span, cfg.amplitude, child_seed(seed, 100 + 2 * i as u64))?;
            let g = random_smooth_path(1, 257, span, cfg.amplitude, child_seed(seed, 101 + 2 * i as u64))?;
            shift_experiment(&path, &f, &g, &cfg.shift)
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = family
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.bound_ratio), hi.max(r.bound_ratio)));
    if !(lo > 0.0) {
        return Err(SbeError::Degenerate("a family member has a vanishing bound ratio".into()));
    }
    Ok(InvarianceReport {
        identity,
        nontrivial,
        equal_pair_difference,
        family,
        family_spread: hi / lo,
    })
}
