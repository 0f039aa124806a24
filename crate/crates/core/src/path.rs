use crate::error::{Result, SbeError};

/// A path sampled on a strictly increasing time grid.
///
/// Values are stored row-major: sample `i` occupies
/// `values[i * dim..(i + 1) * dim]`. Between samples the path is read
/// by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SbeError::InvalidPath("dimension must be at least 1".into()));
        }
        if times.len() < 2 {
            return Err(SbeError::InvalidPath(format!(
                "need at least 2 samples, got {}",
                times.len()
            )));
        }
        if values.len() != times.len() * dim {
            return Err(SbeError::InvalidPath(format!(
                "{} values for {} samples of dimension {}",
                values.len(),
                times.len(),
                dim
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(SbeError::InvalidPath(format!("time {i} is not finite")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SbeError::InvalidPath(format!(
                "times not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SbeError::InvalidPath(format!(
                "value at sample {} is not finite",
                i / dim
            )));
        }
        Ok(Self { times, values, dim })
    }

    /// Uniform grid of `n` points on `[a, b]`.
    pub fn uniform_times(n: usize, a: f64, b: f64) -> Vec<f64> {
        let h = (b - a) / (n - 1) as f64;
        let mut t: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
        t[n - 1] = b;
        t
    }

    pub fn from_fn(times: Vec<f64>, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len() * dim);
        for &t in &times {
            let v = f(t);
            if v.len() != dim {
                return Err(SbeError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            values.extend(v);
        }
        Self::new(times, values, dim)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn end_value(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// Index `i` of the cell `[t_i, t_{i+1})` containing `t`, clamped to the grid.
    pub fn cell_index(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Linear interpolation at `t`; times outside the span are clamped to
    /// the endpoint values.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let i = self.cell_index(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, b) = (self.value(i), self.value(i + 1));
        for k in 0..self.dim {
            out[k] = a[k] + lam * (b[k] - a[k]);
        }
    }

    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out);
        out
    }

    /// Supremum over samples of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.value(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// The path restricted to coordinate `k`, as a one-dimensional path.
    pub fn coordinate(&self, k: usize) -> SampledPath {
        let values = (0..self.len()).map(|i| self.value(i)[k]).collect();
        SampledPath {
            times: self.times.clone(),
            values,
            dim: 1,
        }
    }

    /// The path on `[s, t]`, with interpolated endpoint samples.
    pub fn restrict(&self, s: f64, t: f64) -> Result<SampledPath> {
        if !(s < t) {
            return Err(SbeError::EmptyInterval { s, t });
        }
        if s < self.start() || t > self.end() {
            return Err(SbeError::OutsideSpan {
                s,
                t,
                a: self.start(),
                b: self.end(),
            });
        }
        let mut times = vec![s];
        let mut values = self.interpolate(s);
        for (i, &u) in self.times.iter().enumerate() {
            if u > s && u < t {
                times.push(u);
                values.extend_from_slice(self.value(i));
            }
        }
        times.push(t);
        values.extend(self.interpolate(t));
        SampledPath::new(times, values, self.dim)
    }

    /// `r ↦ ω(a + b − r)` on the same span `[a, b]`.
    pub fn time_reversed(&self) -> SampledPath {
        let (a, b) = (self.start(), self.end());
        let n = self.len();
        let mut times: Vec<f64> = self.times.iter().rev().map(|&u| a + b - u).collect();
        times[0] = a;
        times[n - 1] = b;
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..n).rev() {
            values.extend_from_slice(self.value(i));
        }
        SampledPath {
            times,
            values,
            dim: self.dim,
        }
    }

    pub fn map_values(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<SampledPath> {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.len() {
            values.extend(f(self.value(i)));
        }
        let dim = values.len() / self.len();
        SampledPath::new(self.times.clone(), values, dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(SampledPath::new(vec![0.0], vec![0.0], 1).is_err());
        assert!(SampledPath::new(vec![0.0, 0.0], vec![0.0, 1.0], 1).is_err());
        assert!(SampledPath::new(vec![0.0, 1.0], vec![0.0, f64::NAN], 1).is_err());
        assert!(SampledPath::new(vec![0.0, 1.0], vec![0.0], 1).is_err());
    }

    #[test]
    fn interpolation_is_linear_and_clamped() {
        let p = SampledPath::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0], 1).unwrap();
        assert_eq!(p.interpolate(0.5), vec![1.0]);
        assert_eq!(p.interpolate(2.0), vec![1.0]);
        assert_eq!(p.interpolate(3.0), vec![0.0]);
        assert_eq!(p.interpolate(-1.0), vec![0.0]);
        assert_eq!(p.cell_index(1.0), 1);
        assert_eq!(p.cell_index(3.0), 1);
    }

    #[test]
    fn restriction_and_reversal() {
        let p = SampledPath::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0], 1).unwrap();
        let r = p.restrict(0.5, 2.0).unwrap();
        assert_eq!(r.times(), &[0.5, 1.0, 2.0]);
        assert_eq!(r.values(), &[1.0, 2.0, 1.0]);
        let q = p.time_reversed();
        assert_eq!(q.times(), &[0.0, 2.0, 3.0]);
        assert_eq!(q.interpolate(0.5), p.interpolate(2.5));
    }
}
