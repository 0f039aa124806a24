//! Besov norms `B^α_{q,∞}` and `B^α_{q,1}` of gridded densities through a
//! smooth Littlewood–Paley decomposition computed with the FFT.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{fft_nd, GridDensity, GridSpec};
use crate::error::{invalid, Result, SbeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Summability {
    /// `sup_N N^α ‖P_N ρ‖_{L^q}`
    Sup,
    /// `Σ_N N^α ‖P_N ρ‖_{L^q}`
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub alpha: f64,
    pub q: f64,
    /// Number of annular blocks above the low-frequency block.
    pub blocks: usize,
    /// Frequency (cycles per unit length) of the low block; annulus `j`
    /// lives at `base · 2^j`. Defaults to the largest value the grid resolves.
    pub base_frequency: Option<f64>,
    pub summability: Summability,
}

impl BesovParams {
    pub fn new(alpha: f64, q: f64, blocks: usize) -> Self {
        Self {
            alpha,
            q,
            blocks,
            base_frequency: None,
            summability: Summability::Sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovValue {
    pub value: f64,
    /// `(N, ‖P_N ρ‖_{L^q})`, low block first.
    pub blocks: Vec<(f64, f64)>,
}

/// Smooth radial cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn cutoff(t: f64) -> f64 {
    fn bump(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let u = 2.0 - t;
        bump(u) / (bump(u) + bump(1.0 - u))
    }
}

/// Annulus multiplier `χ(t) − χ(2t)`, supported in `[1/2, 2]`.
pub fn annulus(t: f64) -> f64 {
    cutoff(t) - cutoff(2.0 * t)
}

fn lq_norm(block: &[Complex64], q: f64, vol: f64) -> f64 {
    if q.is_infinite() {
        block.iter().fold(0.0f64, |m, z| m.max(z.re.abs()))
    } else {
        (block.iter().map(|z| z.re.abs().powf(q)).sum::<f64>() * vol).powf(1.0 / q)
    }
}

pub fn besov_norm(rho: &GridDensity, params: &BesovParams) -> Result<BesovValue> {
    besov_norm_values(rho.spec(), rho.values(), params)
}

/// [`besov_norm`] for arbitrary (signed) cell values on `spec`.
pub fn besov_norm_values(spec: &GridSpec, values: &[f64], params: &BesovParams) -> Result<BesovValue> {
    if values.len() != spec.len() {
        return Err(SbeError::DimensionMismatch {
            expected: spec.len(),
            got: values.len(),
        });
    }
    if params.blocks < 3 {
        return Err(invalid("blocks", "need at least 3 blocks"));
    }
    if !(params.q >= 1.0) {
        return Err(invalid("q", "must be in [1, inf]"));
    }
    let h = spec.spacing;
    let top_allowed = 1.0 / (4.0 * h);
    let base = params
        .base_frequency
        .unwrap_or(top_allowed / 2f64.powi(params.blocks as i32));
    let top = base * 2f64.powi(params.blocks as i32);
    if top > top_allowed * (1.0 + 1e-12) {
        return Err(SbeError::GridTooCoarse(format!(
            "top block frequency {top} needs spacing <= {}, grid has {h}",
            1.0 / (4.0 * top)
        )));
    }
    let shape = &spec.shape;
    let d = shape.len();
    let mut hat: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut hat, shape, false);
    // |ξ| in cycles per unit for every FFT bin.
    let freq: Vec<f64> = (0..hat.len())
        .map(|i| {
            let idx = spec.unravel(i);
            let mut s = 0.0;
            for a in 0..d {
                let n = shape[a] as i64;
                let k = idx[a] as i64;
                let signed = if k > n / 2 { k - n } else { k };
                let xi = signed as f64 / (n as f64 * h);
                s += xi * xi;
            }
            s.sqrt()
        })
        .collect();
    let vol = spec.cell_volume();
    let mut out = Vec::with_capacity(params.blocks + 1);
    for j in 0..=params.blocks {
        let n_j = base * 2f64.powi(j as i32);
        let mut block: Vec<Complex64> = hat
            .iter()
            .zip(&freq)
            .map(|(z, &f)| {
                let m = if j == 0 { cutoff(f / n_j) } else { annulus(f / n_j) };
                z * m
            })
            .collect();
        fft_nd(&mut block, shape, true);
        out.push((n_j, lq_norm(&block, params.q, vol)));
    }
    let weighted = out.iter().map(|&(n, b)| n.powf(params.alpha) * b);
    let value = match params.summability {
        Summability::Sup => weighted.fold(0.0, f64::max),
        Summability::Sum => weighted.sum(),
    };
    Ok(BesovValue { value, blocks: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::grid::deposit_grid;
    use crate::occupation::OccupationMeasure;

    #[test]
    fn partition_of_unity() {
        for i in 0..400 {
            let t = i as f64 * 0.01;
            let total = cutoff(t) + (1..12).map(|j| annulus(t / 2f64.powi(j))).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-14);
        }
        assert_eq!(annulus(0.49), 0.0);
        assert_eq!(annulus(2.0), 0.0);
    }

    #[test]
    fn zero_density() {
        let spec = GridSpec::new(vec![0.0], 0.01, vec![128]).unwrap();
        let rho = GridDensity::new(spec, vec![0.0; 128]).unwrap();
        assert_eq!(besov_norm(&rho, &BesovParams::new(0.5, 2.0, 4)).unwrap().value, 0.0);
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let spec = GridSpec::new(vec![0.0], 0.1, vec![64]).unwrap();
        let rho = GridDensity::new(spec, vec![1.0; 64]).unwrap();
        let mut p = BesovParams::new(0.5, 2.0, 4);
        p.base_frequency = Some(1.0);
        assert!(matches!(besov_norm(&rho, &p), Err(SbeError::GridTooCoarse(_))));
    }

    #[test]
    fn unit_atom_blocks_are_flat_in_l1() {
        let spec = GridSpec::new(vec![0.0], 1.0 / 1024.0, vec![1024]).unwrap();
        let mu = OccupationMeasure::from_atoms(vec![0.5 + 0.5 / 1024.0], vec![1.0], 1, (0.0, 1.0)).unwrap();
        let rho = deposit_grid(&mu, &spec).unwrap();
        let mut p = BesovParams::new(0.0, 1.0, 6);
        p.base_frequency = Some(4.0);
        let v0 = besov_norm(&rho, &p).unwrap();
        let annuli: Vec<f64> = v0.blocks[1..].iter().map(|b| b.1).collect();
        let (lo, hi) = annuli.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo < 1.5, "{annuli:?}");
        p.alpha = 0.5;
        let v = besov_norm(&rho, &p).unwrap();
        let top = v.blocks.last().unwrap();
        assert!(v.value >= top.0.powf(0.5) * top.1 - 1e-12);
        assert!(v.value > 4.0 * v0.value);
    }

    #[test]
    fn gaussian_is_stable_under_refinement() {
        let g = |x: &[f64]| (-(x[0] - 0.5).powi(2) / (2.0 * 0.05f64.powi(2))).exp() / (0.05 * (2.0 * std::f64::consts::PI).sqrt());
        let coarse = GridSpec::new(vec![0.0], 1.0 / 256.0, vec![256]).unwrap();
        let mut p = BesovParams::new(0.5, 2.0, 5);
        p.base_frequency = Some(1.0);
        let a = besov_norm(&GridDensity::from_fn(coarse.clone(), g).unwrap(), &p).unwrap().value;
        let b = besov_norm(&GridDensity::from_fn(coarse.refined(2), g).unwrap(), &p).unwrap().value;
        assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
    }
}
