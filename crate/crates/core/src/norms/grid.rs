//! Uniform grids and gridded densities.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, SbeError};
use crate::occupation::{BallMass, OccupationMeasure, SmallBallIndex};

/// Cubic-cell grid: cell `i` along axis `a` covers
/// `[lo[a] + i·h, lo[a] + (i+1)·h)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, spacing: f64, shape: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != shape.len() {
            return Err(SbeError::DimensionMismatch {
                expected: lo.len(),
                got: shape.len(),
            });
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(crate::error::invalid("spacing", "must be positive and finite"));
        }
        if shape.contains(&0) {
            return Err(crate::error::invalid("shape", "every axis needs at least one cell"));
        }
        Ok(Self { lo, spacing, shape })
    }

    /// Smallest grid of the given spacing covering `[lo − pad, hi + pad]`.
    pub fn covering(lo: &[f64], hi: &[f64], spacing: f64, pad: f64) -> Result<Self> {
        let start: Vec<f64> = lo.iter().map(|x| x - pad).collect();
        let shape = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (((b - a + 2.0 * pad) / spacing).ceil() as usize).max(1) + 1)
            .collect();
        Self::new(start, spacing, shape)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.shape)
            .map(|(a, &n)| a + n as f64 * self.spacing)
            .collect()
    }

    /// Multi-index of flat index `i` (row-major, last axis fastest).
    pub fn unravel(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = i % self.shape[a];
            i /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        self.unravel(i)
            .iter()
            .zip(&self.lo)
            .map(|(&k, a)| a + (k as f64 + 0.5) * self.spacing)
            .collect()
    }

    /// The same box with cells split in `factor` along every axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            lo: self.lo.clone(),
            spacing: self.spacing / factor as f64,
            shape: self.shape.iter().map(|n| n * factor).collect(),
        }
    }
}

/// Piecewise-constant density on a [`GridSpec`]; `values[i]` is the
/// density in cell `i`, so its mass is `values[i] · h^d`.
#[derive(Debug, Clone)]
pub struct GridDensity {
    spec: GridSpec,
    values: Vec<f64>,
    // d = 1: prefix masses for exact ball queries; d ≥ 2: cell-centre atoms.
    prefix: Vec<f64>,
    index: Option<SmallBallIndex>,
}

impl GridDensity {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(SbeError::DimensionMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(crate::error::invalid("density", "values must be finite and nonnegative"));
        }
        let vol = spec.cell_volume();
        let (prefix, index) = if spec.dim() == 1 {
            let mut p = Vec::with_capacity(values.len() + 1);
            let mut acc = 0.0;
            p.push(0.0);
            for v in &values {
                acc += v * vol;
                p.push(acc);
            }
            (p, None)
        } else {
            let mut atoms = Vec::new();
            let mut weights = Vec::new();
            for (i, &v) in values.iter().enumerate() {
                if v > 0.0 {
                    atoms.extend(spec.center(i));
                    weights.push(v * vol);
                }
            }
            let mu = OccupationMeasure::from_atoms(atoms, weights, spec.dim(), (0.0, 0.0))?;
            (Vec::new(), Some(SmallBallIndex::build(&mu)))
        };
        Ok(Self {
            spec,
            values,
            prefix,
            index,
        })
    }

    /// Density sampled at cell centres.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(&spec.center(i))).collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    fn cdf(&self, x: f64) -> f64 {
        let h = self.spec.spacing;
        let u = (x - self.spec.lo[0]) / h;
        let n = self.values.len();
        if u <= 0.0 {
            return 0.0;
        }
        if u >= n as f64 {
            return self.prefix[n];
        }
        let i = u.floor() as usize;
        self.prefix[i] + (u - i as f64) * self.values[i] * h
    }
}

impl BallMass for GridDensity {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn ball_mass(&self, r: f64, y: &[f64]) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        match &self.index {
            Some(ix) => ix.small_ball(r, y),
            None => (self.cdf(y[0] + r) - self.cdf(y[0] - r)).max(0.0),
        }
    }

    fn total_mass(&self) -> f64 {
        self.mass()
    }

    fn support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut lo = vec![f64::INFINITY; self.dim()];
        let mut hi = vec![f64::NEG_INFINITY; self.dim()];
        let h = self.spec.spacing;
        let mut any = false;
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                any = true;
                for (a, c) in self.spec.center(i).into_iter().enumerate() {
                    lo[a] = lo[a].min(c - h / 2.0);
                    hi[a] = hi[a].max(c + h / 2.0);
                }
            }
        }
        any.then_some((lo, hi))
    }

    fn resolution(&self) -> Option<f64> {
        Some(self.spec.spacing)
    }
}

/// Mass-conserving cloud-in-cell deposit: each atom's weight is split
/// multilinearly among the surrounding cell centres. Atoms within half a
/// cell of the boundary are clamped onto the outermost centre.
pub fn deposit_grid(mu: &OccupationMeasure, spec: &GridSpec) -> Result<GridDensity> {
    let d = spec.dim();
    if mu.dim() != d {
        return Err(SbeError::DimensionMismatch {
            expected: d,
            got: mu.dim(),
        });
    }
    let hi = spec.hi();
    let h = spec.spacing;
    let mut mass = vec![0.0; spec.len()];
    let mut base = vec![0usize; d];
    let mut frac = vec![0.0; d];
    for (i, &w) in mu.weights().iter().enumerate() {
        let x = mu.atom(i);
        for a in 0..d {
            if x[a] < spec.lo[a] || x[a] > hi[a] {
                return Err(SbeError::Coverage(format!(
                    "atom {i} coordinate {} outside grid [{}, {}]",
                    x[a], spec.lo[a], hi[a]
                )));
            }
            let n = spec.shape[a];
            let u = ((x[a] - spec.lo[a]) / h - 0.5).clamp(0.0, (n - 1) as f64);
            let b = (u.floor() as usize).min(n.saturating_sub(2));
            base[a] = b;
            frac[a] = if n == 1 { 0.0 } else { u - b as f64 };
        }
        for corner in 0..(1usize << d) {
            let mut wt = w;
            let mut idx = base.clone();
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    if spec.shape[a] == 1 {
                        wt = 0.0;
                        break;
                    }
                    idx[a] += 1;
                    wt *= frac[a];
                } else {
                    wt *= 1.0 - frac[a];
                }
            }
            if wt != 0.0 {
                mass[spec.ravel(&idx)] += wt;
            }
        }
    }
    let vol = spec.cell_volume();
    GridDensity::new(spec.clone(), mass.into_iter().map(|m| m / vol).collect())
}

/// In-place d-dimensional FFT over a row-major array.
pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for a in (0..shape.len()).rev() {
        let n = shape[a];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let outer = total / (n * stride);
        for o in 0..outer {
            for s in 0..stride {
                let start = o * n * stride + s;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
        stride *= n;
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn atom_at_centre_and_corner() {
        let spec = GridSpec::new(vec![0.0], 1.0, vec![4]).unwrap();
        let mu = OccupationMeasure::from_atoms(vec![1.5], vec![2.0], 1, (0.0, 1.0)).unwrap();
        let g = deposit_grid(&mu, &spec).unwrap();
        assert_eq!(g.values(), &[0.0, 2.0, 0.0, 0.0]);
        let mu = OccupationMeasure::from_atoms(vec![2.0], vec![1.0], 1, (0.0, 1.0)).unwrap();
        let g = deposit_grid(&mu, &spec).unwrap();
        assert_eq!(g.values(), &[0.0, 0.5, 0.5, 0.0]);
        let mu = OccupationMeasure::from_atoms(vec![5.0], vec![1.0], 1, (0.0, 1.0)).unwrap();
        assert!(matches!(deposit_grid(&mu, &spec), Err(SbeError::Coverage(_))));
    }

    #[test]
    fn deposit_conserves_mass() {
        let mut rng = seeded_rng(3);
        for d in 1..=3 {
            let m = 500;
            let atoms: Vec<f64> = (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mu = OccupationMeasure::from_atoms(atoms, weights, d, (0.0, 1.0)).unwrap();
            let spec = GridSpec::covering(&vec![-1.0; d], &vec![1.0; d], 0.1, 0.0).unwrap();
            let g = deposit_grid(&mu, &spec).unwrap();
            assert!((g.mass() - total).abs() <= 1e-12 * total);
        }
    }

    #[test]
    fn one_dimensional_ball_mass_is_exact() {
        let spec = GridSpec::new(vec![0.0], 0.25, vec![4]).unwrap();
        let g = GridDensity::new(spec, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(g.mass(), 1.0);
        assert_eq!(g.ball_mass(0.125, &[0.125]), 0.25);
        assert_eq!(g.ball_mass(0.25, &[0.25]), 0.75);
        assert_eq!(g.ball_mass(10.0, &[0.0]), 1.0);
    }

    #[test]
    fn fft_round_trip() {
        let shape = [4, 6];
        let orig: Vec<Complex64> = (0..24).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut data = orig.clone();
        fft_nd(&mut data, &shape, false);
        assert!((data[0].re - orig.iter().map(|c| c.re).sum::<f64>()).abs() < 1e-9);
        fft_nd(&mut data, &shape, true);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
