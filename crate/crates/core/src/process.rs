//! Path generators and path transforms.
//!
//! Gaussian paths are sampled exactly in law on uniform grids: Brownian
//! motion by independent increments, fractional Brownian motion by circulant
//! embedding of the fractional Gaussian noise covariance (dense Cholesky
//! fallback when the embedding has a negative eigenvalue), and arbitrary
//! covariances by dense Cholesky.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result, SbeError};
use crate::path::SampledPath;
use crate::rng::child_rng;

/// Covariance function `R(s, t)` of one scalar coordinate.
pub type Covariance = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum GaussianKind {
    BrownianMotion,
    FractionalBrownian { hurst: f64 },
    CustomCovariance(Covariance),
}

impl fmt::Debug for GaussianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaussianKind::BrownianMotion => write!(f, "BrownianMotion"),
            GaussianKind::FractionalBrownian { hurst } => {
                write!(f, "FractionalBrownian(H={hurst})")
            }
            GaussianKind::CustomCovariance(_) => write!(f, "CustomCovariance"),
        }
    }
}

/// A centred Gaussian process with `dim` independent coordinates.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    kind: GaussianKind,
    dim: usize,
}

/// Number of probe times used to validate a custom covariance.
const PROBE_POINTS: usize = 33;

impl GaussianSpec {
    pub fn brownian(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: GaussianKind::BrownianMotion,
            dim,
        })
    }

    pub fn fbm(hurst: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(invalid("hurst", format!("{hurst} not in (0, 1)")));
        }
        Ok(Self {
            kind: GaussianKind::FractionalBrownian { hurst },
            dim,
        })
    }

    /// Custom covariance, validated for symmetry and positive
    /// semidefiniteness on a uniform probe grid of `probe_span`.
    pub fn custom(cov: Covariance, dim: usize, probe_span: (f64, f64)) -> Result<Self> {
        check_dim(dim)?;
        let times = SampledPath::uniform_times(PROBE_POINTS, probe_span.0, probe_span.1);
        for &s in &times {
            for &t in &times {
                let (a, b) = (cov(s, t), cov(t, s));
                if !a.is_finite() || (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                    return Err(invalid(
                        "covariance",
                        format!("not symmetric at ({s}, {t}): {a} vs {b}"),
                    ));
                }
            }
        }
        let m = covariance_matrix(&cov, &times);
        cholesky(&m, times.len()).map_err(|i| SbeError::NotPositiveSemidefinite {
            time: times[i.0],
            pivot: i.1,
        })?;
        Ok(Self {
            kind: GaussianKind::CustomCovariance(cov),
            dim,
        })
    }

    pub fn kind(&self) -> &GaussianKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Scalar covariance `R(s, t)` of one coordinate.
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        match &self.kind {
            GaussianKind::BrownianMotion => s.min(t),
            GaussianKind::FractionalBrownian { hurst } => fbm_covariance(*hurst, s, t),
            GaussianKind::CustomCovariance(c) => c(s, t),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("dim", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// `½(s^{2H} + t^{2H} − |t−s|^{2H})` for `s, t ≥ 0`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

fn covariance_matrix(cov: &Covariance, times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = cov(times[i], times[j]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}

/// Lower Cholesky factor of a PSD matrix, tolerating zero pivots.
/// On failure returns the offending row and its pivot.
fn cholesky(m: &[f64], n: usize) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-10 * scale;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol {
            return Err((j, d));
        }
        let djj = d.max(0.0).sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if djj > tol.sqrt() { s / djj } else { 0.0 };
        }
    }
    Ok(l)
}

/// Sample the process on a uniform grid of `n` points over `span`.
/// The path starts at 0; coordinates are independent.
pub fn gen_gaussian(spec: &GaussianSpec, n: usize, span: (f64, f64), seed: u64) -> Result<SampledPath> {
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    let (a, b) = span;
    if !(b > a) {
        return Err(SbeError::EmptyInterval { s: a, t: b });
    }
    let times = SampledPath::uniform_times(n, a, b);
    let dt = (b - a) / (n - 1) as f64;
    let d = spec.dim;
    let mut values = vec![0.0; n * d];
    for k in 0..d {
        let mut rng = child_rng(seed, k as u64);
        let coord = match &spec.kind {
            GaussianKind::BrownianMotion => {
                let incs: Vec<f64> = (0..n - 1)
                    .map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                cumulate(&incs)
            }
            GaussianKind::FractionalBrownian { hurst } => {
                let incs = fgn(*hurst, n - 1, dt, &mut rng)?;
                cumulate(&incs)
            }
            GaussianKind::CustomCovariance(cov) => custom_sample(cov, &times, &mut rng)?,
        };
        for (i, v) in coord.into_iter().enumerate() {
            values[i * d + k] = v;
        }
    }
    SampledPath::new(times, values, d)
}

fn cumulate(incs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(incs.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for &x in incs {
        acc += x;
        out.push(acc);
    }
    out
}

/// `m` samples of fractional Gaussian noise with step `dt`.
fn fgn<R: Rng>(hurst: f64, m: usize, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    let scale = dt.powf(hurst);
    if let Some(eig) = circulant_eigenvalues(hurst, m) {
        let size = eig.len();
        let mut buf: Vec<Complex64> = eig
            .iter()
            .map(|&l| {
                let s = (l.max(0.0) / size as f64).sqrt();
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                Complex64::new(s * z1, s * z2)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(size).process(&mut buf);
        return Ok(buf[..m].iter().map(|c| scale * c.re).collect());
    }
    // Dense fallback on the Toeplitz increment covariance.
    let mut cov = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            cov[i * m + j] = fgn_autocovariance(hurst, i.abs_diff(j));
        }
    }
    let l = cholesky(&cov, m).map_err(|(i, p)| SbeError::NotPositiveSemidefinite {
        time: (i as f64) * dt,
        pivot: p,
    })?;
    let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    Ok((0..m)
        .map(|i| scale * (0..=i).map(|k| l[i * m + k] * z[k]).sum::<f64>())
        .collect())
}

/// Eigenvalues of the minimal power-of-two circulant embedding of the fGn
/// covariance, or `None` if the embedding is not nonnegative.
pub(crate) fn circulant_eigenvalues(hurst: f64, m: usize) -> Option<Vec<f64>> {
    let half = m.next_power_of_two().max(1);
    let size = 2 * half;
    let mut row: Vec<Complex64> = (0..size)
        .map(|j| {
            let lag = if j <= half { j } else { size - j };
            Complex64::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    let eig: Vec<f64> = row.iter().map(|c| c.re).collect();
    let tol = 1e-10 * eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if eig.iter().any(|&l| l < -tol) {
        None
    } else {
        Some(eig)
    }
}

fn custom_sample<R: Rng>(cov: &Covariance, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = times.len();
    let m = covariance_matrix(cov, times);
    let l = cholesky(&m, n).map_err(|(i, p)| SbeError::NotPositiveSemidefinite {
        time: times[i],
        pivot: p,
    })?;
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x: Vec<f64> = (0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * z[k]).sum::<f64>())
        .collect();
    Ok(x.iter().map(|v| v - x[0]).collect())
}

/// Explicit Euler–Maruyama for `dX = b(t,X) dt + σ(t,X) dB` on a uniform grid.
pub fn euler_maruyama_1d(
    drift: impl Fn(f64, f64) -> f64,
    sigma: impl Fn(f64, f64) -> f64,
    x0: f64,
    n: usize,
    span: (f64, f64),
    seed: u64,
) -> Result<SampledPath> {
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    if !(span.1 > span.0) {
        return Err(SbeError::EmptyInterval { s: span.0, t: span.1 });
    }
    let times = SampledPath::uniform_times(n, span.0, span.1);
    let mut rng = child_rng(seed, 0);
    let mut x = Vec::with_capacity(n);
    x.push(x0);
    for i in 0..n - 1 {
        let (t, xi) = (times[i], x[i]);
        let dt = times[i + 1] - t;
        let z: f64 = rng.sample(StandardNormal);
        let next = xi + drift(t, xi) * dt + sigma(t, xi) * dt.sqrt() * z;
        if !next.is_finite() {
            return Err(SbeError::NonFinite {
                step: i + 1,
                time: times[i + 1],
            });
        }
        x.push(next);
    }
    SampledPath::new(times, x, 1)
}

/// `ω ∘ φ`, where `phi` is a one-dimensional sampled map whose values are
/// times of `path`. Output lives on `phi`'s own time grid.
pub fn reparametrize(path: &SampledPath, phi: &SampledPath) -> Result<SampledPath> {
    if phi.dim() != 1 {
        return Err(SbeError::DimensionMismatch {
            expected: 1,
            got: phi.dim(),
        });
    }
    let vals = phi.values();
    if let Some(i) = vals.windows(2).position(|w| w[1] <= w[0]) {
        return Err(invalid(
            "phi",
            format!("not strictly increasing at index {}", i + 1),
        ));
    }
    let (a, b) = (path.start(), path.end());
    let tol = 1e-9 * (b - a).abs().max(1.0);
    let (p0, p1) = (vals[0], vals[vals.len() - 1]);
    if (p0 - a).abs() > tol || (p1 - b).abs() > tol {
        return Err(invalid(
            "phi",
            format!("endpoints [{p0}, {p1}] do not match path span [{a}, {b}]"),
        ));
    }
    let d = path.dim();
    let mut values = vec![0.0; vals.len() * d];
    for (i, &s) in vals.iter().enumerate() {
        path.interpolate_into(s.clamp(a, b), &mut values[i * d..(i + 1) * d]);
    }
    SampledPath::new(phi.times().to_vec(), values, d)
}

/// Pointwise sum `ω + f`, with `f` resampled on `path`'s grid.
pub fn perturb(path: &SampledPath, f: &SampledPath) -> Result<SampledPath> {
    if f.dim() != path.dim() {
        return Err(SbeError::DimensionMismatch {
            expected: path.dim(),
            got: f.dim(),
        });
    }
    let d = path.dim();
    let mut values = path.values().to_vec();
    let mut buf = vec![0.0; d];
    for (i, &t) in path.times().iter().enumerate() {
        f.interpolate_into(t, &mut buf);
        for k in 0..d {
            values[i * d + k] += buf[k];
        }
    }
    SampledPath::new(path.times().to_vec(), values, d)
}
