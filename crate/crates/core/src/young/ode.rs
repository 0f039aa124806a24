//! Nonlinear Young integrals and the ODE `x_t = x_0 − ω_t + ∫_0^t f(s, x_s) ds`.
//!
//! With `θ = x + ω` the equation reads `θ_t = x_0 + ∫_0^t f(s, θ_s − ω_s) ds`,
//! whose right side is the sewing of the germ
//! `χ_{st} = Σ_i w_i f(s, θ_s − a_i)` over the occupation measure of `ω`
//! on `[s, t]`. The solver runs Picard iteration on this map over a dyadic
//! grid, optionally with one step of Richardson extrapolation in the grid level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::drift::{averaged_field, averaged_jacobian, Drift, Reversed};
use super::sewing::{sewing_integrate, SewingGerm, SewingReport};
use crate::error::{invalid, Result, SbeError};
use crate::occupation::{occupation, OccupationMeasure};
use crate::path::SampledPath;

/// Regularity exponents entering the solvability conditions:
/// `ω ∈ V^{r₁}(SBE^{α₁,p₁}_{q₁})`, `f ∈ C^{r₂-var}(B^{α₂}_{p₂,q₂})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub alpha1: f64,
    pub p1: f64,
    pub q1: f64,
    pub r1: f64,
    pub alpha2: f64,
    pub p2: f64,
    pub q2: f64,
    pub r2: f64,
    pub r3: f64,
    pub gamma: f64,
    pub d: usize,
}

/// Slack of every inequality (positive means satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// `γ₀ = α₁ + α₂ − d(1/q₁ + 1/p₂ − 1)`
    pub gamma0: f64,
    /// `1/q₁ + 1/p₂ − 1`
    pub integrability_lower: f64,
    /// `1 + (α₁+α₂)/d − (1/q₁ + 1/p₂)`
    pub integrability_upper: f64,
    /// `1/r₁ + 1/r₂ − 1`
    pub variation: f64,
    /// `1 + γ − r₁`
    pub r1_margin: f64,
    /// `γ₀ − γ`
    pub gamma_margin: f64,
    /// `γ₀ > 1`: uniqueness holds and Picard iteration contracts.
    pub picard_regime: bool,
}

impl Budget {
    pub fn report(&self) -> BudgetReport {
        let d = self.d as f64;
        let s = 1.0 / self.q1 + 1.0 / self.p2;
        let gamma0 = self.alpha1 + self.alpha2 - d * (s - 1.0);
        BudgetReport {
            gamma0,
            integrability_lower: s - 1.0,
            integrability_upper: 1.0 + (self.alpha1 + self.alpha2) / d - s,
            variation: 1.0 / self.r1 + 1.0 / self.r2 - 1.0,
            r1_margin: 1.0 + self.gamma - self.r1,
            gamma_margin: gamma0 - self.gamma,
            picard_regime: gamma0 > 1.0,
        }
    }

    /// The report, or the first violated inequality by name.
    pub fn check(&self) -> Result<BudgetReport> {
        let r = self.report();
        let checks = [
            (r.integrability_lower, "1 < 1/q1 + 1/p2"),
            (r.integrability_upper, "1/q1 + 1/p2 < 1 + (alpha1 + alpha2)/d"),
            (r.variation, "1/r1 + 1/r2 > 1"),
            (r.r1_margin, "r1 < 1 + gamma"),
            (r.gamma_margin, "gamma < gamma0"),
        ];
        for (slack, name) in checks {
            if !(slack > 0.0) {
                return Err(SbeError::Budget(format!("{name} fails (slack {slack:.6})")));
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungParams {
    /// Dyadic level `L`: the grid has `2^L` cells over the driver's span.
    pub level: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Combine levels `L` and `L−1` as `2 I_L − I_{L−1}`.
    pub richardson: bool,
    pub budget: Option<Budget>,
}

impl Default for YoungParams {
    fn default() -> Self {
        Self {
            level: 10,
            tol: 1e-10,
            max_iter: 200,
            richardson: true,
            budget: None,
        }
    }
}

impl YoungParams {
    fn validate(&self) -> Result<Option<BudgetReport>> {
        if self.level == 0 || self.level > 24 {
            return Err(invalid("level", "must lie in 1..=24"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        self.budget.as_ref().map(Budget::check).transpose()
    }
}

#[derive(Debug, Clone)]
pub struct YoungIntegral {
    /// `t ↦ ∫_a^t f(s, θ_s − ω_s) ds` on the level-`L` grid.
    pub path: SampledPath,
    pub report: SewingReport,
    pub budget: Option<BudgetReport>,
    pub out_of_grid_fraction: f64,
}

/// Extrapolate cumulative sums on `2M + 1` fine nodes using the coarse
/// sums on `M + 1` nodes; odd nodes get the mean correction of their neighbours.
fn richardson(fine: &[f64], coarse: &[f64], d: usize) -> Vec<f64> {
    let n = fine.len() / d;
    let mut out = fine.to_vec();
    let corr = |j: usize, k: usize| fine[2 * j * d + k] - coarse[j * d + k];
    for i in 0..n {
        for k in 0..d {
            out[i * d + k] += if i % 2 == 0 {
                corr(i / 2, k)
            } else {
                0.5 * (corr(i / 2, k) + corr(i / 2 + 1, k))
            };
        }
    }
    out
}

/// Sewing of `χ_{st} = averaged_field(f, μ^ω_{s,t}, θ_s, s)` on `ω`'s span.
pub fn young_integral<D: Drift + ?Sized>(
    f: &D,
    theta: &SampledPath,
    omega: &SampledPath,
    params: &YoungParams,
) -> Result<YoungIntegral> {
    let budget = params.validate()?;
    let d = f.dim();
    if theta.dim() != d || omega.dim() != d {
        return Err(SbeError::DimensionMismatch {
            expected: d,
            got: if theta.dim() != d { theta.dim() } else { omega.dim() },
        });
    }
    let span = (omega.start(), omega.end());
    let slack = 1e-12 * (span.1 - span.0);
    if theta.start() > span.0 + slack || theta.end() < span.1 - slack {
        return Err(SbeError::OutsideSpan {
            s: span.0,
            t: span.1,
            a: theta.start(),
            b: theta.end(),
        });
    }
    let germ = SewingGerm::new(d, |s, t| {
        let mu = occupation(omega, s, t)?;
        averaged_field(f, &mu, &theta.interpolate(s), s)
    });
    let result = sewing_integrate(&germ, span, params.level)?;
    let finest = result.levels[params.level].clone();
    let path = if params.richardson {
        let coarse = &result.levels[params.level - 1];
        SampledPath::new(
            finest.times().to_vec(),
            richardson(finest.values(), coarse.values(), d),
            d,
        )?
    } else {
        finest
    };
    Ok(YoungIntegral {
        path,
        report: result.report,
        budget,
        out_of_grid_fraction: f.out_of_grid_fraction(),
    })
}

/// Result of one ODE or flow solve.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    /// `x` on the grid nodes between the start and end time.
    pub x: SampledPath,
    /// `θ = x + (ω − offset)`
    pub theta: SampledPath,
    pub iterations: usize,
    /// Sup-norm change of each Picard sweep.
    pub changes: Vec<f64>,
    /// Ratios of consecutive changes.
    pub contraction: Vec<f64>,
    pub converged: bool,
    /// `sup |x_L − x_{L−1}|` on common nodes, when the grid allows it.
    pub error_estimate: Option<f64>,
    /// `max(tol, error_estimate)`
    pub solver_tolerance: f64,
    pub budget: Option<BudgetReport>,
    pub out_of_grid_fraction: f64,
}

impl OdeSolution {
    pub fn end_value(&self) -> &[f64] {
        self.x.end_value()
    }
}

/// A sampled path, or its mirror image `u ↦ ω_{pivot−u}` on a subinterval.
/// The mirror's occupation measures are those of `ω` on reflected intervals.
#[derive(Clone, Copy)]
struct Driver<'a> {
    path: &'a SampledPath,
    pivot: Option<f64>,
    span: (f64, f64),
}

impl<'a> Driver<'a> {
    fn forward(path: &'a SampledPath) -> Self {
        Self {
            path,
            pivot: None,
            span: (path.start(), path.end()),
        }
    }

    fn mirrored(path: &'a SampledPath, s: f64, t: f64) -> Self {
        Self {
            path,
            pivot: Some(s + t),
            span: (s, t),
        }
    }

    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn reflect(&self, u: f64) -> f64 {
        match self.pivot {
            Some(p) => (p - u).clamp(self.span.0, self.span.1),
            None => u,
        }
    }

    fn value(&self, u: f64) -> Vec<f64> {
        self.path.interpolate(self.reflect(u))
    }

    fn measure(&self, u0: f64, u1: f64) -> Result<OccupationMeasure> {
        match self.pivot {
            Some(_) => occupation(self.path, self.reflect(u1), self.reflect(u0)),
            None => occupation(self.path, u0, u1),
        }
    }
}

/// Node indices of `s` and `t` on the level grid of `span`.
fn node_range(span: (f64, f64), level: usize, s: f64, t: f64) -> Result<(usize, usize, f64)> {
    let (a, b) = span;
    let cells = 1usize << level;
    let h = (b - a) / cells as f64;
    let snap = |u: f64| -> Result<usize> {
        let k = ((u - a) / h).round();
        if k < 0.0 || k > cells as f64 || (a + k * h - u).abs() > 1e-9 * h {
            return Err(invalid("time", format!("{u} is not a node of the level-{level} grid on [{a}, {b}]")));
        }
        Ok(k as usize)
    };
    let (ks, kt) = (snap(s)?, snap(t)?);
    if kt <= ks {
        return Err(SbeError::EmptyInterval { s, t });
    }
    Ok((ks, kt, h))
}

struct PicardRun {
    nodes: Vec<f64>,
    theta: Vec<f64>,
    changes: Vec<f64>,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn picard<D: Drift + ?Sized>(
    f: &D,
    omega: Driver<'_>,
    level: usize,
    s: f64,
    t: f64,
    x0: &[f64],
    offset: &[f64],
    params: &YoungParams,
    use_richardson: bool,
    guess: Option<&SampledPath>,
) -> Result<PicardRun> {
    let d = f.dim();
    let (ks, kt, h) = node_range(omega.span, level, s, t)?;
    let a = omega.span.0;
    let m = kt - ks;
    if use_richardson && m % 2 == 1 {
        return Err(invalid("time", "extrapolation needs an even number of cells between start and end"));
    }
    let mut nodes: Vec<f64> = (ks..=kt).map(|k| a + k as f64 * h).collect();
    nodes[0] = s;
    nodes[m] = t;
    let fine: Vec<OccupationMeasure> = (0..m)
        .into_par_iter()
        .map(|k| omega.measure(nodes[k], nodes[k + 1]))
        .collect::<Result<_>>()?;
    let coarse: Vec<OccupationMeasure> = if use_richardson {
        (0..m / 2)
            .into_par_iter()
            .map(|j| omega.measure(nodes[2 * j], nodes[2 * j + 2]))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let increments = |cells: &[OccupationMeasure], stride: usize, theta: &[f64]| -> Result<Vec<f64>> {
        let parts: Vec<Vec<f64>> = cells
            .par_iter()
            .enumerate()
            .map(|(k, mu)| {
                let i = k * stride;
                let x: Vec<f64> = (0..d).map(|c| theta[i * d + c] + offset[c]).collect();
                averaged_field(f, mu, &x, nodes[i])
            })
            .collect::<Result<_>>()?;
        let mut cum = vec![0.0; (cells.len() + 1) * d];
        for (k, p) in parts.iter().enumerate() {
            for c in 0..d {
                cum[(k + 1) * d + c] = cum[k * d + c] + p[c];
            }
        }
        Ok(cum)
    };

    let mut theta: Vec<f64> = match guess {
        Some(g) => nodes.iter().flat_map(|&u| g.interpolate(u)).collect(),
        None => nodes.iter().flat_map(|_| x0.iter().copied()).collect(),
    };
    let mut changes = Vec::new();
    let mut converged = false;
    for _ in 0..params.max_iter {
        let fine_cum = increments(&fine, 1, &theta)?;
        let integral = if use_richardson {
            let coarse_cum = increments(&coarse, 2, &theta)?;
            richardson(&fine_cum, &coarse_cum, d)
        } else {
            fine_cum
        };
        let next: Vec<f64> = integral
            .chunks(d)
            .flat_map(|v| v.iter().zip(x0).map(|(i, x)| x + i).collect::<Vec<_>>())
            .collect();
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(SbeError::NonFinite {
                step: i / d,
                time: nodes[i / d],
            });
        }
        let change = next
            .chunks(d)
            .zip(theta.chunks(d))
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        theta = next;
        changes.push(change);
        if change < params.tol {
            converged = true;
            break;
        }
    }
    Ok(PicardRun {
        nodes,
        theta,
        changes,
        converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn solve_between<D: Drift + ?Sized>(
    f: &D,
    omega: Driver<'_>,
    s: f64,
    t: f64,
    x0: &[f64],
    offset: &[f64],
    params: &YoungParams,
    guess: Option<&SampledPath>,
) -> Result<OdeSolution> {
    let budget = params.validate()?;
    let d = f.dim();
    if omega.dim() != d || x0.len() != d {
        return Err(SbeError::DimensionMismatch {
            expected: d,
            got: if omega.dim() != d { omega.dim() } else { x0.len() },
        });
    }
    let run = picard(f, omega, params.level, s, t, x0, offset, params, params.richardson, guess)?;
    let x_of = |run: &PicardRun| -> Result<SampledPath> {
        let mut values = Vec::with_capacity(run.theta.len());
        for (i, &u) in run.nodes.iter().enumerate() {
            let w = omega.value(u);
            for c in 0..d {
                values.push(run.theta[i * d + c] - (w[c] - offset[c]));
            }
        }
        SampledPath::new(run.nodes.clone(), values, d)
    };
    let x = x_of(&run)?;

    // Same solve one level down; usable when start and end are coarse nodes.
    let (ks, kt, _) = node_range(omega.span, params.level, s, t)?;
    let error_estimate = if params.level >= 2 && ks % 2 == 0 && kt % 2 == 0 {
        let coarse_richardson = params.richardson && (kt - ks) % 4 == 0;
        let coarse = picard(f, omega, params.level - 1, s, t, x0, offset, params, coarse_richardson, guess)?;
        let xc = x_of(&coarse)?;
        Some(
            (0..xc.len())
                .map(|j| {
                    x.value(2 * j)
                        .iter()
                        .zip(xc.value(j))
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let theta = SampledPath::new(run.nodes.clone(), run.theta.clone(), d)?;
    let contraction = run
        .changes
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    Ok(OdeSolution {
        x,
        theta,
        iterations: run.changes.len(),
        changes: run.changes,
        contraction,
        converged: run.converged,
        solver_tolerance: params.tol.max(error_estimate.unwrap_or(0.0)),
        error_estimate,
        budget,
        out_of_grid_fraction: f.out_of_grid_fraction(),
    })
}

fn require_converged(sol: OdeSolution) -> Result<OdeSolution> {
    if sol.converged {
        Ok(sol)
    } else {
        Err(SbeError::NoConvergence {
            iterations: sol.iterations,
            last_change: sol.changes.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Solve over the whole span of `omega`, reporting non-convergence in the
/// returned solution instead of as an error.
pub fn solve_ode_report<D: Drift + ?Sized>(
    f: &D,
    omega: &SampledPath,
    x0: &[f64],
    params: &YoungParams,
    guess: Option<&SampledPath>,
) -> Result<OdeSolution> {
    let zero = vec![0.0; f.dim()];
    solve_between(f, Driver::forward(omega), omega.start(), omega.end(), x0, &zero, params, guess)
}

/// `x_t = x_0 − ω_t + ∫ f(s, x_s) ds` over the span of `omega`.
pub fn solve_ode<D: Drift + ?Sized>(f: &D, omega: &SampledPath, x0: &[f64], params: &YoungParams) -> Result<OdeSolution> {
    require_converged(solve_ode_report(f, omega, x0, params, None)?)
}

/// `r ↦ φ(s, r, x_0) = x_0 − (ω_r − ω_s) + ∫_s^r f(u, φ(s, u, x_0)) du` on `[s, t]`.
pub fn flow_solve<D: Drift + ?Sized>(
    f: &D,
    omega: &SampledPath,
    s: f64,
    t: f64,
    x0: &[f64],
    params: &YoungParams,
) -> Result<OdeSolution> {
    let offset = omega.interpolate(s);
    require_converged(solve_between(f, Driver::forward(omega), s, t, x0, &offset, params, None)?)
}

/// `ψ(s, t, x_1)`: the time-reversed flow, driven by `r ↦ ω_{s+t−r}` with
/// drift `−f(s + t − r, ·)`. It inverts `x_0 ↦ φ(s, t, x_0)`.
pub fn flow_inverse<D: Drift + ?Sized>(
    f: &D,
    omega: &SampledPath,
    s: f64,
    t: f64,
    x1: &[f64],
    params: &YoungParams,
) -> Result<OdeSolution> {
    let (ks, kt, _) = node_range((omega.start(), omega.end()), params.level, s, t)?;
    let cells = kt - ks;
    if !cells.is_power_of_two() {
        return Err(invalid("time", "the reversed span must hold a power-of-two number of cells"));
    }
    let level = cells.trailing_zeros() as usize;
    let drift = Reversed { inner: f, pivot: s + t };
    let p = YoungParams { level, ..params.clone() };
    let offset = omega.interpolate(t);
    require_converged(solve_between(&drift, Driver::mirrored(omega, s, t), s, t, x1, &offset, &p, None)?)
}

/// `∂φ(s, t, x_0)/∂x_0` (row-major `d × d`) by the linearized germ
/// `J ↦ J + Σ_i w_i ∇f(u, θ_u − a_i) J` along a computed solution.
pub fn flow_jacobian<D: Drift + ?Sized>(
    f: &D,
    omega: &SampledPath,
    s: f64,
    t: f64,
    x0: &[f64],
    params: &YoungParams,
) -> Result<Vec<f64>> {
    let sol = flow_solve(f, omega, s, t, x0, params)?;
    let d = f.dim();
    let offset = omega.interpolate(s);
    let nodes = sol.theta.times();
    let mut j: Vec<f64> = (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
    for k in 0..nodes.len() - 1 {
        let mu = occupation(omega, nodes[k], nodes[k + 1])?;
        let x: Vec<f64> = sol.theta.value(k).iter().zip(&offset).map(|(a, b)| a + b).collect();
        let a = averaged_jacobian(f, &mu, &x, nodes[k])?;
        let mut next = j.clone();
        for r in 0..d {
            for c in 0..d {
                next[r * d + c] += (0..d).map(|m| a[r * d + m] * j[m * d + c]).sum::<f64>();
            }
        }
        j = next;
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionCheck {
    pub s: f64,
    pub u: f64,
    pub x0_index: usize,
    /// `sup_{r ≥ u} |φ(u, r, φ(s, u, x_0)) − φ(s, r, x_0)|`
    pub error: f64,
    pub tolerance: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct FlowTable {
    pub starts: Vec<f64>,
    pub x0s: Vec<Vec<f64>>,
    /// `solutions[i][j]` is `r ↦ φ(starts[i], r, x0s[j])` up to the end of the span.
    pub solutions: Vec<Vec<OdeSolution>>,
    pub composition: Vec<CompositionCheck>,
}

impl FlowTable {
    pub fn flagged(&self) -> usize {
        self.composition.iter().filter(|c| c.flagged).count()
    }
}

/// Flow from every `(s, x_0)` to the end of `omega`'s span, with the
/// composition law checked for every pair of starts.
pub fn flow<D: Drift + ?Sized>(
    f: &D,
    omega: &SampledPath,
    starts: &[f64],
    x0s: &[Vec<f64>],
    params: &YoungParams,
) -> Result<FlowTable> {
    if starts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("starts", "must be strictly increasing"));
    }
    let end = omega.end();
    let jobs: Vec<(usize, usize)> = (0..starts.len())
        .flat_map(|i| (0..x0s.len()).map(move |j| (i, j)))
        .collect();
    let solved: Vec<OdeSolution> = jobs
        .par_iter()
        .map(|&(i, j)| flow_solve(f, omega, starts[i], end, &x0s[j], params))
        .collect::<Result<_>>()?;
    let mut solutions: Vec<Vec<OdeSolution>> = vec![Vec::with_capacity(x0s.len()); starts.len()];
    for ((i, _), sol) in jobs.iter().zip(solved) {
        solutions[*i].push(sol);
    }
    let pairs: Vec<(usize, usize, usize)> = (0..starts.len())
        .flat_map(|i| ((i + 1)..starts.len()).flat_map(move |k| (0..x0s.len()).map(move |j| (i, k, j))))
        .collect();
    let composition: Vec<CompositionCheck> = pairs
        .par_iter()
        .map(|&(i, k, j)| {
            let first = &solutions[i][j];
            let u = starts[k];
            let y = first.x.interpolate(u);
            let second = flow_solve(f, omega, u, end, &y, params)?;
            let offset = first.x.len() - second.x.len();
            let error = (0..second.x.len())
                .map(|n| {
                    second
                        .x
                        .value(n)
                        .iter()
                        .zip(first.x.value(n + offset))
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max);
            let tolerance = 2.0 * first.solver_tolerance.max(second.solver_tolerance);
            Ok(CompositionCheck {
                s: starts[i],
                u,
                x0_index: j,
                error,
                tolerance,
                flagged: error > tolerance,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FlowTable {
        starts: starts.to_vec(),
        x0s: x0s.to_vec(),
        solutions,
        composition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::GridSpec;
    use crate::process::{gen_gaussian, GaussianSpec};
    use crate::young::drift::{DriftField, Extension, FnDrift};

    fn smooth_driver(n: usize) -> SampledPath {
        let times = SampledPath::uniform_times(n, 0.0, 1.0);
        SampledPath::from_fn(times, 1, |t| vec![0.3 * (3.0 * t).sin()]).unwrap()
    }

    /// Adaptive Simpson quadrature.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn budget_inequalities_are_named() {
        let mut b = Budget {
            alpha1: 0.4,
            p1: 2.0,
            q1: 1.0,
            r1: 1.2,
            alpha2: 0.8,
            p2: 2.0,
            q2: 2.0,
            r2: 2.0,
            r3: 2.0,
            gamma: 0.5,
            d: 1,
        };
        let r = b.check().unwrap();
        assert!((r.gamma0 - 0.7).abs() < 1e-12 && !r.picard_regime);
        b.q1 = 4.0;
        b.p2 = 4.0;
        let e = b.check().unwrap_err().to_string();
        assert!(e.contains("1 < 1/q1 + 1/p2"), "{e}");
        let params = YoungParams {
            budget: Some(b),
            ..Default::default()
        };
        let omega = smooth_driver(33);
        let f = FnDrift::new(1, |_, _: &[f64], o: &mut [f64]| o[0] = 1.0);
        assert!(matches!(young_integral(&f, &omega, &omega, &params), Err(SbeError::Budget(_))));
    }

    #[test]
    fn zero_and_constant_drifts() {
        let omega = smooth_driver(257);
        let params = YoungParams {
            level: 6,
            ..Default::default()
        };
        let zero = FnDrift::new(1, |_, _: &[f64], o: &mut [f64]| o[0] = 0.0);
        let y = young_integral(&zero, &omega, &omega, &params).unwrap();
        assert!(y.path.values().iter().all(|v| *v == 0.0));
        let c = FnDrift::new(1, |_, _: &[f64], o: &mut [f64]| o[0] = 1.5);
        let y = young_integral(&c, &omega, &omega, &params).unwrap();
        for (t, v) in y.path.times().iter().zip(y.path.values()) {
            assert!((v - 1.5 * t).abs() < 1e-13);
        }
        let sol = solve_ode(&zero, &omega, &[0.7], &params).unwrap();
        for i in 0..sol.x.len() {
            let t = sol.x.times()[i];
            assert_eq!(sol.x.value(i)[0], 0.7 - omega.interpolate(t)[0]);
        }
    }

    #[test]
    fn smooth_integral_matches_quadrature() {
        let omega = smooth_driver((1 << 20) + 1);
        let theta = SampledPath::from_fn(SampledPath::uniform_times(4097, 0.0, 1.0), 1, |t| vec![0.5 + t * t]).unwrap();
        let f = FnDrift::new(1, |s: f64, y: &[f64], o: &mut [f64]| o[0] = (y[0] + s).cos());
        let params = YoungParams {
            level: 12,
            ..Default::default()
        };
        let y = young_integral(&f, &theta, &omega, &params).unwrap();
        let integrand = |s: f64| (theta.interpolate(s)[0] - 0.3 * (3.0 * s).sin() + s).cos();
        let oracle = simpson(&integrand, 0.0, 1.0, 1e-12);
        let got = y.path.end_value()[0];
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
        let diffs = &y.report.differences;
        assert!(diffs[diffs.len() - 1] < 0.6 * diffs[diffs.len() - 3]);
    }

    #[test]
    fn linear_drift_matches_classical_reference() {
        let omega = smooth_driver((1 << 14) + 1);
        let f = FnDrift::new(1, |_, x: &[f64], o: &mut [f64]| o[0] = -x[0]);
        let params = YoungParams {
            level: 10,
            ..Default::default()
        };
        let sol = solve_ode(&f, &omega, &[1.0], &params).unwrap();
        // RK4 for x' = −x − ω'(t), x(0) = 1.
        let rhs = |t: f64, x: f64| -x - 0.9 * (3.0 * t).cos();
        let n = 1 << 14;
        let h = 1.0 / n as f64;
        let mut x = 1.0;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let t = k as f64 * h;
            let k1 = rhs(t, x);
            let k2 = rhs(t + h / 2.0, x + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, x + h / 2.0 * k2);
            let k4 = rhs(t + h, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (k + 1) % 16 == 0 {
                worst = worst.max((sol.x.value((k + 1) / 16)[0] - x).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
        assert!(sol.contraction.iter().all(|r| *r < 1.0));
        // A different initial guess converges to the same limit.
        let guess = SampledPath::from_fn(vec![0.0, 1.0], 1, |t| vec![5.0 - 3.0 * t]).unwrap();
        let other = solve_ode_report(&f, &omega, &[1.0], &params, Some(&guess)).unwrap();
        let gap = (0..sol.theta.len())
            .map(|i| (sol.theta.value(i)[0] - other.theta.value(i)[0]).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 2.0 * params.tol);
    }

    #[test]
    fn shifted_drift_and_driver() {
        let omega = gen_gaussian(&GaussianSpec::brownian(1).unwrap(), 4097, (0.0, 1.0), 17).unwrap();
        let grid = GridSpec::new(vec![-6.0], 1.0 / 64.0, vec![768]).unwrap();
        let f = DriftField::from_fn(vec![0.0], grid, Extension::Error, |_, x| vec![(2.0 * x[0]).sin()]).unwrap();
        let c = 0.25;
        let g = f.shifted(&[c]);
        let moved = omega.map_values(|v| vec![v[0] - c]).unwrap();
        let params = YoungParams {
            level: 8,
            ..Default::default()
        };
        let a = solve_ode(&f, &omega, &[0.1], &params).unwrap();
        let b = solve_ode(&g, &moved, &[0.1], &params).unwrap();
        for i in 0..a.x.len() {
            assert!((a.x.value(i)[0] + c - b.x.value(i)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn flow_composition_and_inverse() {
        let omega = gen_gaussian(&GaussianSpec::brownian(1).unwrap(), (1 << 14) + 1, (0.0, 1.0), 5).unwrap();
        let f = FnDrift::new(1, |t: f64, x: &[f64], o: &mut [f64]| o[0] = (x[0] + t).sin() - 0.5 * x[0]);
        let params = YoungParams {
            level: 9,
            ..Default::default()
        };
        let table = flow(&f, &omega, &[0.0, 0.25, 0.5], &[vec![0.0], vec![0.8]], &params).unwrap();
        assert_eq!(table.flagged(), 0, "{:?}", table.composition);
        let x0 = [0.4];
        let fwd = flow_solve(&f, &omega, 0.0, 1.0, &x0, &params).unwrap();
        let back = flow_inverse(&f, &omega, 0.0, 1.0, fwd.end_value(), &params).unwrap();
        let tol = fwd.solver_tolerance.max(back.solver_tolerance);
        assert!((back.end_value()[0] - x0[0]).abs() <= 2.0 * tol, "{} vs {tol}", back.end_value()[0]);

        let zero = FnDrift::new(1, |_, _: &[f64], o: &mut [f64]| o[0] = 0.0);
        let z = flow_solve(&zero, &omega, 0.25, 1.0, &[1.0], &params).unwrap();
        let w = omega.interpolate(0.25)[0];
        for i in 0..z.x.len() {
            let t = z.x.times()[i];
            assert!((z.x.value(i)[0] - (1.0 - (omega.interpolate(t)[0] - w))).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let omega = smooth_driver(4097);
        let f = FnDrift::new(2, |_, x: &[f64], o: &mut [f64]| {
            o[0] = -x[0] + 0.3 * x[1].sin();
            o[1] = -0.5 * x[1] + 0.2 * x[0] * x[0];
        });
        let omega2 = SampledPath::from_fn(omega.times().to_vec(), 2, |t| vec![0.3 * (3.0 * t).sin(), 0.1 * t]).unwrap();
        let params = YoungParams {
            level: 9,
            ..Default::default()
        };
        let x0 = [0.3, -0.2];
        let j = flow_jacobian(&f, &omega2, 0.0, 1.0, &x0, &params).unwrap();
        let eps = 1e-5;
        for c in 0..2 {
            let mut up = x0;
            let mut dn = x0;
            up[c] += eps;
            dn[c] -= eps;
            let a = flow_solve(&f, &omega2, 0.0, 1.0, &up, &params).unwrap();
            let b = flow_solve(&f, &omega2, 0.0, 1.0, &dn, &params).unwrap();
            for r in 0..2 {
                let fd = (a.end_value()[r] - b.end_value()[r]) / (2.0 * eps);
                assert!((fd - j[r * 2 + c]).abs() < 1e-2, "({r},{c}): {fd} vs {}", j[r * 2 + c]);
            }
        }
    }

    #[test]
    fn continuity_in_theta() {
        let omega = gen_gaussian(&GaussianSpec::brownian(1).unwrap(), 4097, (0.0, 1.0), 2).unwrap();
        let f = FnDrift::new(1, |_, x: &[f64], o: &mut [f64]| o[0] = (3.0 * x[0]).sin());
        let params = YoungParams {
            level: 8,
            richardson: false,
            ..Default::default()
        };
        let base = SampledPath::from_fn(SampledPath::uniform_times(257, 0.0, 1.0), 1, |t| vec![t]).unwrap();
        let i0 = young_integral(&f, &base, &omega, &params).unwrap();
        let mut spans = Vec::new();
        let mut dists = Vec::new();
        for k in 0..8 {
            let eps = 10f64.powf(-1.0 - k as f64 * 0.25);
            let th = base.map_values(|v| vec![v[0] + eps]).unwrap();
            let i1 = young_integral(&f, &th, &omega, &params).unwrap();
            let dist = (0..i0.path.len())
                .map(|n| (i0.path.value(n)[0] - i1.path.value(n)[0]).abs())
                .fold(0.0, f64::max);
            spans.push(eps);
            dists.push(dist);
        }
        let slope = crate::norms::holder_exponent(&spans, &dists).unwrap().slope;
        assert!(slope >= 0.9, "{slope}");
    }
}
