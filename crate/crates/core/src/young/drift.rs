//! Drift fields `f(t, x): ℝ × ℝ^d → ℝ^d` and the averaging operator.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SbeError};
use crate::norms::{besov_norm_values, BesovParams, GridSpec};
use crate::occupation::OccupationMeasure;

/// A time-dependent vector field on `ℝ^d`.
pub trait Drift: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Row-major `d × d` Jacobian `∂f_i/∂x_j`, by central differences
    /// unless overridden.
    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for j in 0..d {
            let h = 1e-6 * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            self.eval(t, &xp, &mut fp)?;
            xp[j] = x[j] - h;
            self.eval(t, &xp, &mut fm)?;
            xp[j] = x[j];
            for i in 0..d {
                out[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(())
    }

    /// Fraction of evaluations that fell outside the field's grid.
    fn out_of_grid_fraction(&self) -> f64 {
        0.0
    }
}

/// Drift given by a closure `f(t, x, out)`.
pub struct FnDrift<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Sync> FnDrift<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Sync> Drift for FnDrift<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, x, out);
        Ok(())
    }
}

/// `−f(pivot − t, x)`: the drift of the time-reversed equation.
pub struct Reversed<'a, D: ?Sized> {
    pub inner: &'a D,
    pub pivot: f64,
}

impl<D: Drift + ?Sized> Drift for Reversed<'_, D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner.eval(self.pivot - t, x, out)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }

    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.inner.jacobian(self.pivot - t, x, out)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }

    fn out_of_grid_fraction(&self) -> f64 {
        self.inner.out_of_grid_fraction()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// `f = 0` outside the grid; such evaluations are counted.
    Zero,
    /// Evaluating outside the grid is an error.
    Error,
}

/// Declared (not certified) regularity `f ∈ C^{r-var}(B^α_{p,q})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclaredRegularity {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

/// Gridded drift: values at the cell centres of `grid` for each time in
/// `times`, multilinear in space and linear in time (constant outside the
/// time grid). Layout: `values[(time · cells + cell) · d + component]`.
#[derive(Debug)]
pub struct DriftField {
    times: Vec<f64>,
    grid: GridSpec,
    values: Vec<f64>,
    extension: Extension,
    declared: Option<DeclaredRegularity>,
    measured: Vec<f64>,
    evaluations: AtomicU64,
    outside: AtomicU64,
}

impl Clone for DriftField {
    fn clone(&self) -> Self {
        Self {
            times: self.times.clone(),
            grid: self.grid.clone(),
            values: self.values.clone(),
            extension: self.extension,
            declared: self.declared,
            measured: self.measured.clone(),
            evaluations: AtomicU64::new(0),
            outside: AtomicU64::new(0),
        }
    }
}

impl DriftField {
    pub fn new(
        times: Vec<f64>,
        grid: GridSpec,
        values: Vec<f64>,
        extension: Extension,
        declared: Option<DeclaredRegularity>,
    ) -> Result<Self> {
        let d = grid.dim();
        if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "need a nonempty strictly increasing time grid"));
        }
        if grid.shape.iter().any(|&n| n < 2) {
            return Err(invalid("grid", "need at least 2 nodes per axis"));
        }
        let expected = times.len() * grid.len() * d;
        if values.len() != expected {
            return Err(SbeError::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("entry {i} is not finite")));
        }
        let mut field = Self {
            times,
            grid,
            values,
            extension,
            declared,
            measured: Vec::new(),
            evaluations: AtomicU64::new(0),
            outside: AtomicU64::new(0),
        };
        if let Some(reg) = declared {
            field.measured = field.measure_besov(reg.alpha, reg.p)?;
            if let Some(i) = field.measured.iter().position(|v| !v.is_finite()) {
                return Err(invalid("values", format!("time slice {i} has non-finite Besov norm")));
            }
        }
        Ok(field)
    }

    /// Sample `f(t, x)` at every time and grid node.
    pub fn from_fn(
        times: Vec<f64>,
        grid: GridSpec,
        extension: Extension,
        f: impl Fn(f64, &[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let d = grid.dim();
        let mut values = Vec::with_capacity(times.len() * grid.len() * d);
        for &t in &times {
            for i in 0..grid.len() {
                let v = f(t, &grid.center(i));
                if v.len() != d {
                    return Err(SbeError::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
                values.extend(v);
            }
        }
        Self::new(times, grid, values, extension, None)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn declared(&self) -> Option<DeclaredRegularity> {
        self.declared
    }

    /// Besov `B^α_{p,∞}` norm of each time slice (max over components),
    /// measured when a regularity is declared.
    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    /// Same field with the spatial grid moved by `+c`, i.e. `f(t, x − c)`.
    pub fn shifted(&self, c: &[f64]) -> Self {
        let mut out = self.clone();
        for (lo, dc) in out.grid.lo.iter_mut().zip(c) {
            *lo += dc;
        }
        out
    }

    pub fn measure_besov(&self, alpha: f64, p: f64) -> Result<Vec<f64>> {
        let d = self.grid.dim();
        let cells = self.grid.len();
        let params = BesovParams::new(alpha, p, 3);
        (0..self.times.len())
            .map(|ti| {
                let mut worst: f64 = 0.0;
                for comp in 0..d {
                    let slice: Vec<f64> = (0..cells)
                        .map(|c| self.values[(ti * cells + c) * d + comp])
                        .collect();
                    worst = worst.max(besov_norm_values(&self.grid, &slice, &params)?.value);
                }
                Ok(worst)
            })
            .collect()
    }

    fn slice_eval(&self, ti: usize, x: &[f64], scale: f64, out: &mut [f64]) -> bool {
        let d = self.grid.dim();
        let h = self.grid.spacing;
        let cells = self.grid.len();
        let mut base = [0usize; 8];
        let mut frac = [0f64; 8];
        for a in 0..d {
            let n = self.grid.shape[a];
            let u = (x[a] - self.grid.lo[a]) / h - 0.5;
            if !(u >= 0.0 && u <= (n - 1) as f64) {
                return false;
            }
            let b = (u.floor() as usize).min(n - 2);
            base[a] = b;
            frac[a] = u - b as f64;
        }
        let mut idx = [0usize; 8];
        for corner in 0..(1usize << d) {
            let mut w = scale;
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    idx[a] = base[a] + 1;
                    w *= frac[a];
                } else {
                    idx[a] = base[a];
                    w *= 1.0 - frac[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            let cell = self.grid.ravel(&idx[..d]);
            let row = &self.values[(ti * cells + cell) * d..(ti * cells + cell + 1) * d];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
        true
    }
}

impl Drift for DriftField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        if self.grid.dim() > 8 {
            return Err(invalid("grid", "at most 8 spatial dimensions"));
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let m = self.times.len();
        let inside = if m == 1 || t <= self.times[0] {
            self.slice_eval(0, x, 1.0, out)
        } else if t >= self.times[m - 1] {
            self.slice_eval(m - 1, x, 1.0, out)
        } else {
            let k = self.times.partition_point(|&s| s <= t) - 1;
            let lam = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
            let a = self.slice_eval(k, x, 1.0 - lam, out);
            a && (lam == 0.0 || self.slice_eval(k + 1, x, lam, out))
        };
        if !inside {
            out.iter_mut().for_each(|v| *v = 0.0);
            self.outside.fetch_add(1, Ordering::Relaxed);
            if self.extension == Extension::Error {
                return Err(SbeError::Coverage(format!("drift evaluated outside its grid at x = {x:?}")));
            }
        }
        Ok(())
    }

    fn out_of_grid_fraction(&self) -> f64 {
        let n = self.evaluations.load(Ordering::Relaxed);
        if n == 0 {
            0.0
        } else {
            self.outside.load(Ordering::Relaxed) as f64 / n as f64
        }
    }
}

/// `T f(s, x) = Σ_i w_i f(s, x − a_i)`, the convolution of the time slice
/// `f(s, ·)` with the occupation measure `μ = Σ w_i δ_{a_i}`, evaluated at `x`.
pub fn averaged_field(f: &(impl Drift + ?Sized), mu: &OccupationMeasure, x: &[f64], s: f64) -> Result<Vec<f64>> {
    let d = f.dim();
    if mu.dim() != d || x.len() != d {
        return Err(SbeError::DimensionMismatch {
            expected: d,
            got: if mu.dim() != d { mu.dim() } else { x.len() },
        });
    }
    let mut acc = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut v = vec![0.0; d];
    for (i, &w) in mu.weights().iter().enumerate() {
        for ((yk, xk), ak) in y.iter_mut().zip(x).zip(mu.atom(i)) {
            *yk = xk - ak;
        }
        f.eval(s, &y, &mut v)?;
        for (a, vk) in acc.iter_mut().zip(&v) {
            *a += w * vk;
        }
    }
    Ok(acc)
}

/// `Σ_i w_i ∇f(s, x − a_i)`, the row-major Jacobian of [`averaged_field`] in `x`.
pub fn averaged_jacobian(f: &(impl Drift + ?Sized), mu: &OccupationMeasure, x: &[f64], s: f64) -> Result<Vec<f64>> {
    let d = f.dim();
    let mut acc = vec![0.0; d * d];
    let mut y = vec![0.0; d];
    let mut j = vec![0.0; d * d];
    for (i, &w) in mu.weights().iter().enumerate() {
        for ((yk, xk), ak) in y.iter_mut().zip(x).zip(mu.atom(i)) {
            *yk = xk - ak;
        }
        f.jacobian(s, &y, &mut j)?;
        for (a, jk) in acc.iter_mut().zip(&j) {
            *a += w * jk;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupation::occupation;
    use crate::path::SampledPath;

    fn line_grid(lo: f64, hi: f64, n: usize) -> GridSpec {
        let h = (hi - lo) / (n - 1) as f64;
        GridSpec::new(vec![lo - h / 2.0], h, vec![n]).unwrap()
    }

    #[test]
    fn constant_and_linear_slices() {
        let times = SampledPath::uniform_times(1001, 0.0, 1.0);
        let omega = SampledPath::from_fn(times, 1, |t| vec![(3.0 * t).sin()]).unwrap();
        let mu = occupation(&omega, 0.2, 0.7).unwrap();

        let c = DriftField::from_fn(vec![0.0], line_grid(-5.0, 5.0, 11), Extension::Error, |_, _| vec![2.5]).unwrap();
        let v = averaged_field(&c, &mu, &[0.3], 0.2).unwrap();
        assert!((v[0] - 2.5 * 0.5).abs() < 1e-12);

        // f(s, y) = y is reproduced exactly by multilinear interpolation.
        let lin = DriftField::from_fn(vec![0.0], line_grid(-5.0, 5.0, 11), Extension::Error, |_, y| vec![y[0]]).unwrap();
        let x = 0.3;
        let v = averaged_field(&lin, &mu, &[x], 0.2).unwrap();
        let dt = 1e-3;
        let oracle: f64 = (200..700).map(|i| dt * (x - (3.0 * i as f64 * dt).sin())).sum();
        assert!((v[0] - oracle).abs() < 1e-10, "{} vs {oracle}", v[0]);
    }

    #[test]
    fn single_atom() {
        let mu = OccupationMeasure::from_atoms(vec![0.25, -0.5], vec![0.125], 2, (0.0, 0.125)).unwrap();
        let f = FnDrift::new(2, |_, x: &[f64], out: &mut [f64]| {
            out[0] = x[0] * x[1];
            out[1] = x[0] - x[1];
        });
        let v = averaged_field(&f, &mu, &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(v, vec![0.125 * 0.75 * 1.5, 0.125 * (0.75 - 1.5)]);
    }

    #[test]
    fn extension_modes() {
        let g = line_grid(-1.0, 1.0, 5);
        let zero = DriftField::from_fn(vec![0.0], g.clone(), Extension::Zero, |_, _| vec![1.0]).unwrap();
        let mut out = [0.0];
        zero.eval(0.0, &[3.0], &mut out).unwrap();
        assert_eq!(out[0], 0.0);
        zero.eval(0.0, &[0.0], &mut out).unwrap();
        assert_eq!(out[0], 1.0);
        assert_eq!(zero.out_of_grid_fraction(), 0.5);
        let strict = DriftField::from_fn(vec![0.0], g, Extension::Error, |_, _| vec![1.0]).unwrap();
        assert!(matches!(strict.eval(0.0, &[3.0], &mut out), Err(SbeError::Coverage(_))));
    }

    #[test]
    fn time_interpolation_and_reversal() {
        let g = line_grid(-1.0, 1.0, 3);
        let f = DriftField::from_fn(vec![0.0, 1.0], g, Extension::Error, |t, _| vec![t]).unwrap();
        let mut out = [0.0];
        f.eval(0.25, &[0.0], &mut out).unwrap();
        assert_eq!(out[0], 0.25);
        f.eval(3.0, &[0.0], &mut out).unwrap();
        assert_eq!(out[0], 1.0);
        let r = Reversed { inner: &f, pivot: 1.0 };
        r.eval(0.25, &[0.0], &mut out).unwrap();
        assert_eq!(out[0], -0.75);
    }

    #[test]
    fn declared_regularity_is_measured() {
        let g = GridSpec::new(vec![-2.0], 1.0 / 32.0, vec![128]).unwrap();
        let f = DriftField::from_fn(vec![0.0, 1.0], g.clone(), Extension::Zero, |_, x| vec![(-x[0] * x[0] * 4.0).exp()]).unwrap();
        let reg = DeclaredRegularity { alpha: 0.5, p: 2.0, q: 2.0, r: 1.0 };
        let with = DriftField::new(f.times().to_vec(), g, f.values().to_vec(), Extension::Zero, Some(reg)).unwrap();
        assert_eq!(with.measured().len(), 2);
        assert!(with.measured().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn jacobian_of_linear_field() {
        let g = GridSpec::new(vec![-2.0, -2.0], 0.5, vec![9, 9]).unwrap();
        let f = DriftField::from_fn(vec![0.0], g, Extension::Error, |_, x| vec![2.0 * x[0] - x[1], 0.5 * x[1]]).unwrap();
        let mut j = [0.0; 4];
        f.jacobian(0.0, &[0.1, 0.3], &mut j).unwrap();
        for (a, b) in j.iter().zip([2.0, -1.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
