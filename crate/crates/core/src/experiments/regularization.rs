//! Young ODEs driven by fractional Brownian motion with rough drifts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::norms::GridSpec;
use crate::path::SampledPath;
use crate::process::{gen_gaussian, GaussianSpec};
use crate::rng::{child_rng, child_seed};
use crate::young::{solve_ode_report, Budget, BudgetReport, DeclaredRegularity, DriftField, Extension, YoungParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoDrift {
    Zero,
    /// `f_c(x) = sin(x_c + 0.5 x_{c+1})`
    Smooth,
    /// Band-limited random field with power-law spectrum `|k|^{−(α₂ + d/2)}`.
    Rough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    pub hurst: f64,
    pub dim: usize,
    pub drift: DemoDrift,
    pub alpha2: f64,
    pub p2: f64,
    pub q2: f64,
    pub p1: f64,
    pub q1: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// `α₁ = 1/(2H) − d/2 − alpha1_margin`.
    pub alpha1_margin: f64,
    /// Grid cells per axis of the drift field.
    pub n_grid: usize,
    pub modes: usize,
    pub amplitude: f64,
    pub levels: Vec<usize>,
    pub n_steps: usize,
    pub x0: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub richardson: bool,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            hurst: 0.25,
            dim: 1,
            drift: DemoDrift::Rough,
            alpha2: -0.2,
            p2: 1.5,
            q2: 2.0,
            p1: 2.0,
            q1: 2.0,
            r1: 2.0,
            r2: 1.0,
            r3: 1.0,
            alpha1_margin: 0.05,
            n_grid: 256,
            modes: 24,
            amplitude: 1.0,
            levels: vec![6, 7, 8, 9, 10],
            n_steps: (1 << 14) + 1,
            x0: vec![0.0],
            tol: 1e-10,
            max_iter: 200,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRun {
    pub level: usize,
    pub converged: bool,
    pub iterations: usize,
    pub contraction: Vec<f64>,
    pub end_value: Vec<f64>,
    /// `sup |x_L − x_{L−1}|` on common nodes, against the previous level.
    pub self_distance: Option<f64>,
    /// `log₂` of consecutive self-distance ratios.
    pub rate: Option<f64>,
    pub out_of_grid_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationReport {
    pub budget: BudgetReport,
    pub alpha1: f64,
    pub gamma: f64,
    pub declared: Option<DeclaredRegularity>,
    /// Measured `B^{α₂}_{p₂,∞}` norm of the drift.
    pub measured: Vec<f64>,
    pub runs: Vec<LevelRun>,
}

/// Budget for the configuration: `α₁` from the Gaussian criterion and `γ`
/// midway between `r₁ − 1` and `γ₀`.
pub fn demo_budget(cfg: &RegularizationConfig) -> Budget {
    let d = cfg.dim as f64;
    let alpha1 = 1.0 / (2.0 * cfg.hurst) - d / 2.0 - cfg.alpha1_margin;
    let gamma0 = alpha1 + cfg.alpha2 - d * (1.0 / cfg.q1 + 1.0 / cfg.p2 - 1.0);
    Budget {
        alpha1,
        p1: cfg.p1,
        q1: cfg.q1,
        r1: cfg.r1,
        alpha2: cfg.alpha2,
        p2: cfg.p2,
        q2: cfg.q2,
        r2: cfg.r2,
        r3: cfg.r3,
        gamma: 0.5 * ((cfg.r1 - 1.0).max(0.0) + gamma0),
        d: cfg.dim,
    }
}

/// Drift field of `cfg.drift` kind on `[lo, hi]^d`, declared at `(α₂, p₂, q₂, r₂)`.
pub fn demo_drift(cfg: &RegularizationConfig, lo: f64, hi: f64, seed: u64) -> Result<DriftField> {
    let d = cfg.dim;
    let spacing = (hi - lo) / cfg.n_grid as f64;
    let grid = GridSpec::new(vec![lo; d], spacing, vec![cfg.n_grid; d])?;
    let width = hi - lo;
    let mut rng = child_rng(seed, 0);
    let max_k = (cfg.n_grid / 8).max(2) as i64;
    let modes: Vec<(Vec<f64>, f64, usize, f64)> = (0..cfg.modes)
        .map(|m| {
            let k: Vec<f64> = loop {
                let k: Vec<f64> = (0..d).map(|_| rng.random_range(-max_k..=max_k) as f64).collect();
                if k.iter().any(|v| *v != 0.0) {
                    break k;
                }
            };
            let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
            let amp = cfg.amplitude * norm.powf(-(cfg.alpha2 + d as f64 / 2.0)) / (cfg.modes as f64).sqrt();
            (k, amp, m % d, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len() * d);
    for i in 0..grid.len() {
        let x = grid.center(i);
        let mut v = vec![0.0; d];
        match cfg.drift {
            DemoDrift::Zero => {}
            DemoDrift::Smooth => {
                for c in 0..d {
                    v[c] = cfg.amplitude * (x[c] + 0.5 * x[(c + 1) % d]).sin();
                }
            }
            DemoDrift::Rough => {
                for (k, amp, comp, phase) in &modes {
                    let arg: f64 = k.iter().zip(&x).map(|(a, b)| a * (b - lo)).sum::<f64>();
                    v[*comp] += amp * (std::f64::consts::TAU * arg / width + phase).cos();
                }
            }
        }
        values.extend(v);
    }
    let declared = DeclaredRegularity {
        alpha: cfg.alpha2,
        p: cfg.p2,
        q: cfg.q2,
        r: cfg.r2,
    };
    DriftField::new(vec![0.0], grid, values, Extension::Zero, Some(declared))
}

/// Solve at increasing dyadic levels and report self-convergence and
/// contraction. A violated budget is reported before anything is computed.
pub fn regularization_demo(cfg: &RegularizationConfig, seed: u64) -> Result<RegularizationReport> {
    if cfg.x0.len() != cfg.dim {
        return Err(invalid("x0", format!("need {} coordinates", cfg.dim)));
    }
    if cfg.levels.is_empty() || cfg.levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(invalid("levels", "need consecutive increasing levels"));
    }
    let budget = demo_budget(cfg);
    let report = budget.check()?;
    let path = gen_gaussian(&GaussianSpec::fbm(cfg.hurst, cfg.dim)?, cfg.n_steps, (0.0, 1.0), child_seed(seed, 0))?;
    let reach = path.sup_norm() + cfg.x0.iter().map(|v| v.abs()).fold(0.0, f64::max) + 2.0;
    let field = demo_drift(cfg, -reach, reach, child_seed(seed, 1))?;
    let mut runs: Vec<LevelRun> = Vec::new();
    let mut prev: Option<SampledPath> = None;
    for &level in &cfg.levels {
        let params = YoungParams {
            level,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            richardson: cfg.richardson,
            budget: Some(budget),
        };
        let sol = solve_ode_report(&field, &path, &cfg.x0, &params, None)?;
        let self_distance = prev.as_ref().map(|p| {
            (0..p.len())
                .map(|j| {
                    p.value(j)
                        .iter()
                        .zip(sol.x.value(2 * j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max)
        });
        let rate = match (runs.last().and_then(|r| r.self_distance), self_distance) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
            _ => None,
        };
        runs.push(LevelRun {
            level,
            converged: sol.converged,
            iterations: sol.iterations,
            contraction: sol.contraction.clone(),
            end_value: sol.end_value().to_vec(),
            self_distance,
            rate,
            out_of_grid_fraction: sol.out_of_grid_fraction,
        });
        prev = Some(sol.x);
    }
    Ok(RegularizationReport {
        budget: report,
        alpha1: budget.alpha1,
        gamma: budget.gamma,
        declared: field.declared(),
        measured: field.measured().to_vec(),
        runs,
    })
}
