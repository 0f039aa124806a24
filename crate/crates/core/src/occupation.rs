//! Occupation measures of sampled paths and small-ball queries.
//!
//! `occupation(path, s, t)` places one atom per grid cell at the left
//! endpoint value, weighted by the overlap of the cell with `[s, t]`.
//! Masses are accumulated in 128-bit fixed point, so any query structure
//! returns bit-identical results to a brute-force sum over the same atoms.

use rustfft::num_complex::Complex64;

use crate::error::{Result, SbeError};
use crate::path::SampledPath;

/// Fixed-point scale for exact mass accumulation: 2^90.
const FIXED_SCALE: f64 = 1_237_940_039_285_380_274_899_124_224.0;
/// Largest total mass representable without overflow.
const MAX_TOTAL_MASS: f64 = 68_719_476_736.0; // 2^36

pub(crate) fn to_fixed(w: f64) -> i128 {
    (w * FIXED_SCALE) as i128
}

pub(crate) fn from_fixed(x: i128) -> f64 {
    x as f64 / FIXED_SCALE
}

/// Weighted atomic measure `Σ w_i δ_{x_i}` on ℝ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    span: (f64, f64),
}

impl OccupationMeasure {
    /// Build from raw atoms (row-major, `weights.len()` rows of `dim`).
    /// Weights must be strictly positive.
    pub fn from_atoms(atoms: Vec<f64>, weights: Vec<f64>, dim: usize, span: (f64, f64)) -> Result<Self> {
        if dim == 0 || atoms.len() != weights.len() * dim {
            return Err(SbeError::Format(format!(
                "{} coordinates for {} atoms of dimension {dim}",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(SbeError::Format(format!("weight {i} is not positive")));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(SbeError::Format("non-finite atom coordinate".into()));
        }
        if weights.iter().sum::<f64>() > MAX_TOTAL_MASS {
            return Err(SbeError::Format("total mass exceeds 2^36".into()));
        }
        Ok(Self {
            atoms,
            weights,
            dim,
            span,
        })
    }

    /// The zero measure on ℝ^d.
    pub fn zero(dim: usize) -> Self {
        Self {
            atoms: Vec::new(),
            weights: Vec::new(),
            dim,
            span: (0.0, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// Total mass, accumulated exactly in fixed point.
    pub fn total_mass(&self) -> f64 {
        from_fixed(self.weights.iter().map(|&w| to_fixed(w)).sum())
    }

    /// Axis-aligned bounding box of the atoms, `None` for the zero measure.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.len() {
            for (k, &x) in self.atom(i).iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        Some((lo, hi))
    }

    /// Multiply every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_atoms(
            self.atoms.clone(),
            self.weights.iter().map(|w| w * c).collect(),
            self.dim,
            self.span,
        )
    }

    /// Concatenate atoms of measures over adjacent spans.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(SbeError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        let span = (self.span.0.min(other.span.0), self.span.1.max(other.span.1));
        Self::from_atoms(atoms, weights, self.dim, span)
    }

    /// Image measure under `x ↦ c·x`.
    pub fn dilated(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }
}

/// Occupation measure of `path` over `[s, t]` with left-endpoint atoms.
pub fn occupation(path: &SampledPath, s: f64, t: f64) -> Result<OccupationMeasure> {
    if !(s < t) {
        return Err(SbeError::EmptyInterval { s, t });
    }
    let (a, b) = (path.start(), path.end());
    if s < a || t > b {
        return Err(SbeError::OutsideSpan { s, t, a, b });
    }
    let times = path.times();
    let first = path.cell_index(s);
    let d = path.dim();
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for i in first..times.len() - 1 {
        if times[i] >= t {
            break;
        }
        let w = times[i + 1].min(t) - times[i].max(s);
        if w > 0.0 {
            atoms.extend_from_slice(path.value(i));
            weights.push(w);
        }
    }
    OccupationMeasure::from_atoms(atoms, weights, d, (s, t))
}

/// Atoms shifted by `+y`.
pub fn translate(mu: &OccupationMeasure, y: &[f64]) -> Result<OccupationMeasure> {
    if y.len() != mu.dim {
        return Err(SbeError::DimensionMismatch {
            expected: mu.dim,
            got: y.len(),
        });
    }
    let mut atoms = mu.atoms.clone();
    for chunk in atoms.chunks_mut(mu.dim) {
        for (x, dy) in chunk.iter_mut().zip(y) {
            *x += dy;
        }
    }
    Ok(OccupationMeasure { atoms, ..mu.clone() })
}

/// `Σ w_i exp(i ξ·x_i)`.
pub fn fourier_occupation(mu: &OccupationMeasure, xi: &[f64]) -> Result<Complex64> {
    if xi.len() != mu.dim {
        return Err(SbeError::DimensionMismatch {
            expected: mu.dim,
            got: xi.len(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &w) in mu.weights.iter().enumerate() {
        let phase: f64 = mu.atom(i).iter().zip(xi).map(|(a, b)| a * b).sum();
        acc += Complex64::from_polar(w, phase);
    }
    Ok(acc)
}

/// Closed-ball membership `|x − y| ≤ r`, the predicate shared by every
/// small-ball backend.
#[inline]
pub fn in_ball(x: &[f64], y: &[f64], r: f64) -> bool {
    if x.len() == 1 {
        (x[0] - y[0]).abs() <= r
    } else {
        dist2(x, y) <= r * r
    }
}

#[inline]
fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Brute-force `F_μ(r, y)`; the reference for every index.
pub fn brute_force_ball_mass(mu: &OccupationMeasure, r: f64, y: &[f64]) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    let mut acc: i128 = 0;
    for (i, &w) in mu.weights.iter().enumerate() {
        if in_ball(mu.atom(i), y, r) {
            acc += to_fixed(w);
        }
    }
    from_fixed(acc)
}

/// Anything that can answer `F_μ(r, y)`, the mass of the closed ball of
/// radius `r` centred at `y`.
pub trait BallMass: Sync {
    fn dim(&self) -> usize;
    fn ball_mass(&self, r: f64, y: &[f64]) -> f64;
    fn total_mass(&self) -> f64;
    /// Bounding box of the support (or of its effective part).
    fn support(&self) -> Option<(Vec<f64>, Vec<f64>)>;
    /// Characteristic resolution of the representation: median
    /// nearest-neighbour spacing of atoms, or the cell size of a grid.
    fn resolution(&self) -> Option<f64>;
}

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct KdNode {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    mass: i128,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
enum Backend {
    /// d = 1: sorted positions and fixed-point prefix sums.
    Sorted { xs: Vec<f64>, prefix: Vec<i128> },
    /// d ≥ 2: kd-tree over permuted atoms with subtree masses.
    KdTree {
        points: Vec<f64>,
        masses: Vec<i128>,
        nodes: Vec<KdNode>,
    },
}

/// Small-ball index over an occupation measure.
#[derive(Debug, Clone)]
pub struct SmallBallIndex {
    dim: usize,
    backend: Backend,
    total: i128,
    support: Option<(Vec<f64>, Vec<f64>)>,
    resolution: Option<f64>,
}

impl SmallBallIndex {
    pub fn build(mu: &OccupationMeasure) -> Self {
        let d = mu.dim;
        let total: i128 = mu.weights.iter().map(|&w| to_fixed(w)).sum();
        let support = mu.bounding_box();
        let backend = if d == 1 {
            let mut order: Vec<usize> = (0..mu.len()).collect();
            order.sort_by(|&i, &j| mu.atoms[i].total_cmp(&mu.atoms[j]));
            let xs: Vec<f64> = order.iter().map(|&i| mu.atoms[i]).collect();
            let mut prefix = Vec::with_capacity(xs.len() + 1);
            let mut acc: i128 = 0;
            prefix.push(0);
            for &i in &order {
                acc += to_fixed(mu.weights[i]);
                prefix.push(acc);
            }
            Backend::Sorted { xs, prefix }
        } else {
            build_kdtree(mu)
        };
        let mut idx = Self {
            dim: d,
            backend,
            total,
            support,
            resolution: None,
        };
        idx.resolution = idx.median_nn_spacing();
        idx
    }

    fn median_nn_spacing(&self) -> Option<f64> {
        let mut gaps: Vec<f64> = match &self.backend {
            Backend::Sorted { xs, .. } => {
                let n = xs.len();
                if n < 2 {
                    return None;
                }
                (0..n)
                    .map(|i| {
                        let l = if i > 0 { xs[i] - xs[i - 1] } else { f64::INFINITY };
                        let r = if i + 1 < n { xs[i + 1] - xs[i] } else { f64::INFINITY };
                        l.min(r)
                    })
                    .collect()
            }
            Backend::KdTree { points, nodes, .. } => {
                let n = points.len() / self.dim;
                if n < 2 {
                    return None;
                }
                (0..n)
                    .map(|i| self.nearest_other(points, nodes, i))
                    .collect()
            }
        };
        gaps.retain(|g| *g > 0.0 && g.is_finite());
        if gaps.is_empty() {
            return None;
        }
        let mid = gaps.len() / 2;
        let (_, m, _) = gaps.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        Some(*m)
    }

    /// Distance from point `i` to its nearest neighbour at positive distance.
    fn nearest_other(&self, points: &[f64], nodes: &[KdNode], i: usize) -> f64 {
        let d = self.dim;
        let p = &points[i * d..(i + 1) * d];
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &nodes[ni];
            if box_min_dist2(&node.lo, &node.hi, p) >= best {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for j in node.start..node.end {
                        let q = &points[j * d..(j + 1) * d];
                        let dd = dist2(p, q);
                        if dd > 0.0 && dd < best {
                            best = dd;
                        }
                    }
                }
            }
        }
        best.sqrt()
    }

    /// `F_μ(r, y)`; `r < 0` yields 0.
    pub fn small_ball(&self, r: f64, y: &[f64]) -> f64 {
        debug_assert!(r >= 0.0, "negative radius {r}");
        if r < 0.0 {
            return 0.0;
        }
        match &self.backend {
            Backend::Sorted { xs, prefix } => {
                let y = y[0];
                let lo = xs.partition_point(|&a| a < y && (y - a) > r);
                let hi = xs.partition_point(|&a| a <= y || (a - y) <= r);
                if hi <= lo {
                    0.0
                } else {
                    from_fixed(prefix[hi] - prefix[lo])
                }
            }
            Backend::KdTree {
                points,
                masses,
                nodes,
            } => from_fixed(kd_query(points, masses, nodes, self.dim, r, y)),
        }
    }
}

impl BallMass for SmallBallIndex {
    fn dim(&self) -> usize {
        self.dim
    }
    fn ball_mass(&self, r: f64, y: &[f64]) -> f64 {
        self.small_ball(r, y)
    }
    fn total_mass(&self) -> f64 {
        from_fixed(self.total)
    }
    fn support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.support.clone()
    }
    fn resolution(&self) -> Option<f64> {
        self.resolution
    }
}

fn build_kdtree(mu: &OccupationMeasure) -> Backend {
    let d = mu.dim;
    let mut order: Vec<usize> = (0..mu.len()).collect();
    let mut nodes = Vec::new();
    if !order.is_empty() {
        split_node(mu, &mut order, 0, mu.len(), &mut nodes);
    }
    let mut points = Vec::with_capacity(mu.atoms.len());
    let mut masses = Vec::with_capacity(mu.len());
    for &i in &order {
        points.extend_from_slice(mu.atom(i));
        masses.push(to_fixed(mu.weights[i]));
    }
    // Subtree masses, children are always pushed after their parent.
    for ni in (0..nodes.len()).rev() {
        let m = match nodes[ni].children {
            Some((l, r)) => nodes[l].mass + nodes[r].mass,
            None => masses[nodes[ni].start..nodes[ni].end].iter().sum(),
        };
        nodes[ni].mass = m;
    }
    let _ = d;
    Backend::KdTree {
        points,
        masses,
        nodes,
    }
}

fn split_node(
    mu: &OccupationMeasure,
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<KdNode>,
) -> usize {
    let d = mu.dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &i in &order[start..end] {
        for (k, &x) in mu.atom(i).iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let id = nodes.len();
    nodes.push(KdNode {
        lo: lo.clone(),
        hi: hi.clone(),
        start,
        end,
        mass: 0,
        children: None,
    });
    if end - start > LEAF_SIZE {
        let axis = (0..d)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] > lo[axis] {
            let mid = (start + end) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
                mu.atom(i)[axis].total_cmp(&mu.atom(j)[axis])
            });
            let l = split_node(mu, order, start, mid, nodes);
            let r = split_node(mu, order, mid, end, nodes);
            nodes[id].children = Some((l, r));
        }
    }
    id
}

fn box_min_dist2(lo: &[f64], hi: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..y.len() {
        let g = if y[k] < lo[k] {
            lo[k] - y[k]
        } else if y[k] > hi[k] {
            y[k] - hi[k]
        } else {
            0.0
        };
        s += g * g;
    }
    s
}

fn box_max_dist2(lo: &[f64], hi: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..y.len() {
        let g = (y[k] - lo[k]).abs().max((hi[k] - y[k]).abs());
        s += g * g;
    }
    s
}

fn kd_query(points: &[f64], masses: &[i128], nodes: &[KdNode], d: usize, r: f64, y: &[f64]) -> i128 {
    if nodes.is_empty() {
        return 0;
    }
    let r2 = r * r;
    let mut acc: i128 = 0;
    let mut stack = vec![0usize];
    while let Some(ni) = stack.pop() {
        let node = &nodes[ni];
        // Rounded arithmetic is monotone, so box tests agree with the
        // per-point predicate.
        if box_min_dist2(&node.lo, &node.hi, y) > r2 {
            continue;
        }
        if box_max_dist2(&node.lo, &node.hi, y) <= r2 {
            acc += node.mass;
            continue;
        }
        match node.children {
            Some((l, rr)) => {
                stack.push(l);
                stack.push(rr);
            }
            None => {
                for j in node.start..node.end {
                    if in_ball(&points[j * d..(j + 1) * d], y, r) {
                        acc += masses[j];
                    }
                }
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{gen_gaussian, GaussianSpec};
    use crate::rng::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_measure(m: usize, d: usize, seed: u64) -> OccupationMeasure {
        let mut rng = seeded_rng(seed);
        let atoms: Vec<f64> = (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.001..0.01)).collect();
        OccupationMeasure::from_atoms(atoms, weights, d, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn constant_path_is_single_location() {
        let p = SampledPath::new(vec![0.0, 0.5, 1.0, 2.0], vec![3.0; 4], 1).unwrap();
        let mu = occupation(&p, 0.25, 1.5).unwrap();
        assert!(mu.atoms().iter().all(|&x| x == 3.0));
        assert_eq!(mu.total_mass(), 1.25);
        let idx = SmallBallIndex::build(&mu);
        assert_eq!(idx.small_ball(0.0, &[3.0]), 1.25);
    }

    #[test]
    fn total_mass_and_additivity() {
        let spec = GaussianSpec::brownian(2).unwrap();
        let p = gen_gaussian(&spec, 1001, (0.0, 1.0), 9).unwrap();
        for &(s, t) in &[(0.0, 1.0), (0.1234, 0.777), (0.5, 0.5005)] {
            let mu = occupation(&p, s, t).unwrap();
            let ulp = f64::EPSILON * (t - s);
            assert!((mu.total_mass() - (t - s)).abs() <= 4.0 * ulp.max(f64::EPSILON));
        }
        let whole = occupation(&p, 0.0, 1.0).unwrap();
        let left = occupation(&p, 0.0, 0.5).unwrap();
        let right = occupation(&p, 0.5, 1.0).unwrap();
        assert_eq!(left.concat(&right).unwrap(), whole);
        // Split inside a cell: the shared atom appears twice with split weight.
        let left = occupation(&p, 0.0, 0.50037).unwrap();
        let right = occupation(&p, 0.50037, 1.0).unwrap();
        assert_eq!(left.len() + right.len(), whole.len() + 1);
        assert_eq!(
            left.concat(&right).unwrap().total_mass(),
            whole.total_mass()
        );
        assert!(occupation(&p, 0.5, 0.5).is_err());
        assert!(occupation(&p, -0.1, 0.5).is_err());
    }

    #[test]
    fn small_ball_edge_cases() {
        let mu = random_measure(50, 1, 3);
        let idx = SmallBallIndex::build(&mu);
        assert_eq!(idx.small_ball(0.0, &[5.0]), 0.0);
        assert_eq!(idx.small_ball(10.0, &[0.0]), mu.total_mass());
        let mu2 = random_measure(50, 3, 4);
        let idx2 = SmallBallIndex::build(&mu2);
        assert_eq!(idx2.small_ball(0.0, &[5.0, 0.0, 0.0]), 0.0);
        assert_eq!(idx2.small_ball(10.0, &[0.0, 0.0, 0.0]), mu2.total_mass());
    }

    #[test]
    fn index_matches_brute_force_exactly() {
        for d in 1..=3 {
            let mu = random_measure(200, d, 10 + d as u64);
            let idx = SmallBallIndex::build(&mu);
            let mut rng = seeded_rng(99);
            for _ in 0..100 {
                let r = rng.random_range(0.0..1.5);
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                assert_eq!(idx.small_ball(r, &y), brute_force_ball_mass(&mu, r, &y));
            }
            // Radii hitting atoms exactly.
            for i in 0..20 {
                let y = vec![0.1; d];
                let r = dist2(mu.atom(i), &y).sqrt();
                assert_eq!(idx.small_ball(r, &y), brute_force_ball_mass(&mu, r, &y));
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let mu = random_measure(300, 2, 8);
        let y = [0.3, -0.7];
        let shifted = translate(&mu, &y).unwrap();
        let back = translate(&shifted, &[-0.3, 0.7]).unwrap();
        for (a, b) in back.atoms().iter().zip(mu.atoms()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(translate(&mu, &[0.0, 0.0]).unwrap(), mu);
        let (i0, i1) = (SmallBallIndex::build(&mu), SmallBallIndex::build(&shifted));
        let mut rng = seeded_rng(1);
        for _ in 0..100 {
            let r = rng.random_range(0.0..1.0);
            let z = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let zy = [z[0] - y[0], z[1] - y[1]];
            let (a, b) = (i1.small_ball(r, &z), i0.small_ball(r, &zy));
            assert!((a - b).abs() <= 1e-3 * mu.total_mass(), "{a} vs {b}");
        }
        assert!(translate(&mu, &[1.0]).is_err());
    }

    #[test]
    fn fourier_cases() {
        let mu = random_measure(100, 2, 2);
        let z = fourier_occupation(&mu, &[0.0, 0.0]).unwrap();
        assert!((z.re - mu.total_mass()).abs() < 1e-12 && z.im == 0.0);
        let single = OccupationMeasure::from_atoms(vec![0.4], vec![0.5], 1, (0.0, 0.5)).unwrap();
        let z = fourier_occupation(&single, &[3.0]).unwrap();
        assert!((z - Complex64::from_polar(0.5, 1.2)).norm() < 1e-15);
        let mut rng = seeded_rng(3);
        for _ in 0..50 {
            let xi = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
            assert!(fourier_occupation(&mu, &xi).unwrap().norm() <= mu.total_mass() + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn small_ball_is_a_cdf_in_r(seed in 0u64..1000, y in -1.5f64..1.5, d in 1usize..3) {
            let mu = random_measure(64, d, seed);
            let idx = SmallBallIndex::build(&mu);
            let y = vec![y; d];
            let mut last = 0.0;
            for j in 0..60 {
                let r = j as f64 * 0.06;
                let f = idx.small_ball(r, &y);
                prop_assert!(f >= last);
                last = f;
            }
            prop_assert_eq!(idx.small_ball(100.0, &y), mu.total_mass());
        }
    }
}
