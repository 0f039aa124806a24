//! Dyadic difference calculus.
//!
//! `Δ_0 F(r) = F(r) − F(r/2)` and `Δ_{k+1} F(r) = Δ_k F(r) − 2^{k+1} Δ_k F(r/2)`,
//! so `Δ_k F(r) = Σ_j a_j F(r/2^j)` for integer coefficients `a_0..a_{k+1}`.
//! The adjoint on `L²(ℝ⁺, dr/r)` uses the same coefficients at `F(2^j r)`.
//! `Δ_k` annihilates polynomials of degree `≤ k`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Result, SbeError};

pub const MAX_ORDER: usize = 32;

/// Exact integer coefficients of `Δ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaKCoeffs {
    k: usize,
    exact: Vec<BigInt>,
    float: Vec<f64>,
}

impl DeltaKCoeffs {
    pub fn order(&self) -> usize {
        self.k
    }

    /// `a_j`, the coefficient of `F(r / 2^j)`.
    pub fn exact(&self) -> &[BigInt] {
        &self.exact
    }

    pub fn as_f64(&self) -> &[f64] {
        &self.float
    }

    /// `(2^{-j}, a_j)` pairs.
    pub fn scaled_pairs(&self) -> Vec<(f64, f64)> {
        self.float
            .iter()
            .enumerate()
            .map(|(j, &a)| ((0.5f64).powi(j as i32), a))
            .collect()
    }

    /// `Σ_j a_j 2^{-jm}` in exact arithmetic, multiplied by `2^{(k+1)m}`.
    pub fn moment_numerator(&self, m: u32) -> BigInt {
        let top = self.k + 1;
        self.exact
            .iter()
            .enumerate()
            .map(|(j, a)| a * (BigInt::one() << ((top - j) as u32 * m) as usize))
            .sum()
    }

    /// Largest `|a_j|` as `f64`.
    pub fn max_abs(&self) -> f64 {
        self.float.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `Σ |a_j|`, the worst-case amplification of input rounding.
    pub fn l1(&self) -> f64 {
        self.float.iter().map(|a| a.abs()).sum()
    }
}

/// Coefficients of `Δ_k` by unrolling the recursion.
pub fn delta_k_coeffs(k: usize) -> Result<DeltaKCoeffs> {
    if k > MAX_ORDER {
        return Err(SbeError::OrderOutOfRange(k));
    }
    let mut a: Vec<BigInt> = vec![BigInt::one(), -BigInt::one()];
    for step in 1..=k {
        let factor = BigInt::one() << step;
        let mut next = vec![BigInt::zero(); a.len() + 1];
        for (j, aj) in a.iter().enumerate() {
            next[j] += aj;
            next[j + 1] -= &factor * aj;
        }
        a = next;
    }
    let float = a.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
    Ok(DeltaKCoeffs { k, exact: a, float })
}

/// Order `k = ⌈α + d − 1⌉` used by the SBE norm, with a flag set when
/// `α + d` is an integer (the ceiling boundary case).
pub fn sbe_order(alpha: f64, dim: usize) -> (usize, bool) {
    let x = alpha + dim as f64 - 1.0;
    let k = x.ceil().max(0.0) as usize;
    (k, x == x.ceil())
}

// Error-free transformations for compensated accumulation.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated `Σ a_j (hi_j + lo_j)`.
fn compensated_dot(coeffs: &[f64], values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (&a, (hi, lo)) in coeffs.iter().zip(values) {
        let (p, e) = two_prod(a, hi);
        let (t, e2) = two_sum(s, p);
        s = t;
        c += e + e2 + a * lo;
    }
    s + c
}

fn checked(values: Vec<f64>, r: f64) -> Result<Vec<f64>> {
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(SbeError::NonFinite { step: j, time: r });
    }
    Ok(values)
}

/// `Δ_k F(r) = Σ_j a_j F(r / 2^j)`.
pub fn apply_delta_k(f: impl Fn(f64) -> f64, coeffs: &DeltaKCoeffs, r: f64) -> Result<f64> {
    let vals = checked(
        (0..coeffs.float.len()).map(|j| f(r * 0.5f64.powi(j as i32))).collect(),
        r,
    )?;
    Ok(compensated_dot(&coeffs.float, vals.into_iter().map(|v| (v, 0.0))))
}

/// `Δ_k^* F(r) = Σ_j a_j F(2^j r)`.
pub fn apply_delta_k_star(f: impl Fn(f64) -> f64, coeffs: &DeltaKCoeffs, r: f64) -> Result<f64> {
    let vals = checked(
        (0..coeffs.float.len()).map(|j| f(r * 2f64.powi(j as i32))).collect(),
        r,
    )?;
    Ok(compensated_dot(&coeffs.float, vals.into_iter().map(|v| (v, 0.0))))
}

/// `Δ_k F(r)` for `F` returning an unevaluated sum `hi + lo`
/// (double-double input), combined with compensated accumulation.
pub fn apply_delta_k_dd(f: impl Fn(f64) -> (f64, f64), coeffs: &DeltaKCoeffs, r: f64) -> Result<f64> {
    let vals: Vec<(f64, f64)> = (0..coeffs.float.len())
        .map(|j| f(r * 0.5f64.powi(j as i32)))
        .collect();
    if let Some(j) = vals.iter().position(|(h, l)| !h.is_finite() || !l.is_finite()) {
        return Err(SbeError::NonFinite { step: j, time: r });
    }
    Ok(compensated_dot(&coeffs.float, vals.into_iter()))
}

/// `Σ_j a_j v_j` for integer-valued samples, in exact arithmetic.
pub fn apply_exact(coeffs: &DeltaKCoeffs, values: &[i64]) -> BigInt {
    coeffs
        .exact
        .iter()
        .zip(values)
        .map(|(a, &v)| a * BigInt::from(v))
        .sum()
}

/// `Δ_k 1_{[y,∞)}(x)` in exact integer arithmetic.
pub fn delta_k_step_at(coeffs: &DeltaKCoeffs, x: f64, y: f64) -> BigInt {
    let vals: Vec<i64> = (0..coeffs.exact.len())
        .map(|j| (x * 0.5f64.powi(j as i32) >= y) as i64)
        .collect();
    apply_exact(coeffs, &vals)
}

/// `Δ_k^* 1_{[0,x]}(y)` in exact integer arithmetic.
pub fn delta_k_star_box_at(coeffs: &DeltaKCoeffs, x: f64, y: f64) -> BigInt {
    let vals: Vec<i64> = (0..coeffs.exact.len())
        .map(|j| {
            let z = y * 2f64.powi(j as i32);
            (z >= 0.0 && z <= x) as i64
        })
        .collect();
    apply_exact(coeffs, &vals)
}

/// Table `c_{0,k}, …, c_{h_max,k}` with
/// `c_{h,k} = Σ_{h_0+⋯+h_k=h} Π_j 2^{j h_j}`, via
/// `c_{h,k+1} = Σ_{m≤h} 2^{(k+1)m} c_{h−m,k}`.
pub fn chk_table(h_max: usize, k: usize) -> Vec<BigUint> {
    let mut c: Vec<BigUint> = vec![BigUint::one(); h_max + 1];
    for level in 1..=k {
        let mut next = vec![BigUint::zero(); h_max + 1];
        for (h, slot) in next.iter_mut().enumerate() {
            for m in 0..=h {
                *slot += &c[h - m] << (level * m);
            }
        }
        c = next;
    }
    c
}

/// `c_{h,k}` as an exact integer.
pub fn chk_coeff(h: usize, k: usize) -> BigUint {
    chk_table(h, k).pop().unwrap_or_else(BigUint::one)
}

/// `c_{h,k}` as `u64`, erroring on overflow.
pub fn chk_coeff_u64(h: usize, k: usize) -> Result<u64> {
    chk_coeff(h, k)
        .to_u64()
        .ok_or(SbeError::CoefficientOverflow { h, k })
}

/// `|φ(r) − Σ_{h≤H} c_{h,k} Δ_k^*φ(2^h r)|`.
pub fn reconstruction_residual(phi: impl Fn(f64) -> f64, k: usize, r: f64, h_max: usize) -> Result<f64> {
    let coeffs = delta_k_coeffs(k)?;
    let table = chk_table(h_max, k);
    let mut terms = Vec::with_capacity(h_max + 1);
    for (h, c) in table.iter().enumerate() {
        let c = c.to_f64().unwrap_or(f64::INFINITY);
        let d = apply_delta_k_star(&phi, &coeffs, r * 2f64.powi(h as i32))?;
        terms.push(if d == 0.0 { 0.0 } else { c * d });
    }
    let target = phi(r);
    let mut acc = compensated_dot(
        &vec![1.0; terms.len()],
        terms.iter().map(|&t| (t, 0.0)),
    );
    acc -= target;
    Ok(acc.abs())
}

/// Coefficients of the Leibniz-type identity
/// `Δ_k(r^d F(r)) = Σ_{h≤d} b_h r^d Δ_{k−d} F(r/2^h)` for `k ≥ d ≥ 1`:
/// `b_h = a_h^{(d−1)} 2^{−hd}` where `a^{(d−1)}` are the `Δ_{d−1}` coefficients.
pub fn leibniz_coeffs(d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(SbeError::InvalidParameter {
            name: "d",
            reason: "must be at least 1".into(),
        });
    }
    let a = delta_k_coeffs(d - 1)?;
    Ok(a.float
        .iter()
        .enumerate()
        .map(|(h, &x)| x * 0.5f64.powi((h * d) as i32))
        .collect())
}

/// Polynomial `Σ c_m x^m` evaluated by Horner's rule in double-double
/// arithmetic, returned as `(hi, lo)`.
pub fn poly_eval_dd(coeffs: &[f64], x: f64) -> (f64, f64) {
    let (mut hi, mut lo) = (0.0, 0.0);
    for &c in coeffs.iter().rev() {
        // (hi, lo) * x
        let (p, e) = two_prod(hi, x);
        let e = e + lo * x;
        let (p, e) = two_sum(p, e);
        // + c
        let (s, f) = two_sum(p, c);
        let (s, f) = two_sum(s, f + e);
        hi = s;
        lo = f;
    }
    (hi, lo)
}

/// One line of the identity self-test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SelfTestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> SelfTestCheck {
    SelfTestCheck {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Worst `|Δ_k p(r)| / (max|c| · max(1,r)^k)` over random polynomials of
/// degree `≤ k`, `k ≤ k_max`, at `r = 2^{-8}, …, 2^8`.
pub fn polynomial_annihilation_error(k_max: usize, trials: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut rng = crate::rng::seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..=k_max {
        let coeffs = delta_k_coeffs(k)?;
        for _ in 0..trials {
            let poly: Vec<f64> = (0..=k).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let scale = poly.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if scale == 0.0 {
                continue;
            }
            for e in -8..=8 {
                let r = 2f64.powi(e);
                let v = apply_delta_k_dd(|x| poly_eval_dd(&poly, x), &coeffs, r)?;
                worst = worst.max(v.abs() / (scale * r.max(1.0).powi(k as i32)));
            }
        }
    }
    Ok(worst)
}

/// Worst relative error of the Leibniz-type identity for a smooth test
/// function, over `d ≤ d_max`, `k ∈ {d, …, d+3}` and a set of radii.
pub fn leibniz_error(d_max: usize) -> Result<f64> {
    let f = |r: f64| (0.7 * r).sin() + (-r).exp();
    let mut worst: f64 = 0.0;
    for d in 1..=d_max {
        let b = leibniz_coeffs(d)?;
        for k in d..=d + 3 {
            let ck = delta_k_coeffs(k)?;
            let ckd = delta_k_coeffs(k - d)?;
            for &r in &[0.3, 1.0, 2.5, 7.0] {
                let lhs = apply_delta_k(|x| x.powi(d as i32) * f(x), &ck, r)?;
                let mut rhs = 0.0;
                for (h, &bh) in b.iter().enumerate() {
                    rhs += bh * apply_delta_k(f, &ckd, r * 0.5f64.powi(h as i32))?;
                }
                rhs *= r.powi(d as i32);
                let scale = ck.l1() * r.powi(d as i32) * 2.0;
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// The identity suite: coefficient invariants, polynomial annihilation,
/// adjoint indicator move, `c_{h,k}` bound, reconstruction and Leibniz.
pub fn selftest(seed: u64) -> Result<Vec<SelfTestCheck>> {
    use rand::Rng;
    let mut out = Vec::new();

    let mut bad = None;
    for k in 0..=MAX_ORDER {
        let c = delta_k_coeffs(k)?;
        if (0..=k as u32).any(|m| !c.moment_numerator(m).is_zero()) {
            bad = Some(k);
            break;
        }
    }
    out.push(check(
        "coefficient_invariants",
        bad.is_none(),
        match bad {
            None => format!("moments 0..=k vanish exactly for k <= {MAX_ORDER}"),
            Some(k) => format!("moment condition fails at k={k}"),
        },
    ));

    let poly = polynomial_annihilation_error(6, 50, seed)?;
    out.push(check(
        "polynomial_annihilation",
        poly <= 1e-10,
        format!("worst scaled residual {poly:.3e} (tolerance 1e-10, k <= 6)"),
    ));

    let mut rng = crate::rng::seeded_rng(crate::rng::child_seed(seed, 1));
    let mut mismatches = 0usize;
    for k in 0..=6 {
        let c = delta_k_coeffs(k)?;
        for _ in 0..1000 {
            let x: f64 = rng.random_range(1e-3..10.0);
            let y: f64 = rng.random_range(1e-3..10.0);
            if delta_k_step_at(&c, x, y) != delta_k_star_box_at(&c, x, y) {
                mismatches += 1;
            }
        }
    }
    out.push(check(
        "adjoint_indicator",
        mismatches == 0,
        format!("{mismatches} mismatches over 7000 probes"),
    ));

    let mut violations = 0usize;
    for k in 0..=5 {
        for (h, c) in chk_table(20, k).iter().enumerate() {
            if c > &(BigUint::one() << (k + h * k)) {
                violations += 1;
            }
        }
    }
    out.push(check(
        "chk_bound",
        violations == 0,
        format!("{violations} violations of c_hk <= 2^k 2^(hk), k <= 5, h <= 20"),
    ));

    let res = reconstruction_residual(|r| (-r * r).exp(), 0, 1.0, 40)?;
    out.push(check(
        "reconstruction",
        res < 1e-12,
        format!("gaussian, k=0, H=40: residual {res:.3e}"),
    ));

    let leib = leibniz_error(3)?;
    out.push(check(
        "leibniz",
        leib < 1e-10,
        format!("worst relative error {leib:.3e}"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn low_order_coefficients() {
        let c0 = delta_k_coeffs(0).unwrap();
        assert_eq!(c0.scaled_pairs(), vec![(1.0, 1.0), (0.5, -1.0)]);
        let c1 = delta_k_coeffs(1).unwrap();
        assert_eq!(c1.scaled_pairs(), vec![(1.0, 1.0), (0.5, -3.0), (0.25, 2.0)]);
        assert!(matches!(delta_k_coeffs(33), Err(SbeError::OrderOutOfRange(33))));
    }

    #[test]
    fn coefficient_invariants_exact() {
        for k in 0..=MAX_ORDER {
            let c = delta_k_coeffs(k).unwrap();
            assert_eq!(c.exact().len(), k + 2);
            for m in 0..=k as u32 {
                assert!(c.moment_numerator(m).is_zero(), "k={k} m={m}");
            }
            assert!(!c.moment_numerator(k as u32 + 1).is_zero());
        }
    }

    #[test]
    fn recursion_reproduced() {
        // Δ_{k+1}F(r) = Δ_kF(r) − 2^{k+1}Δ_kF(r/2) on a generic function.
        let f = |r: f64| (1.3 * r).sin() + r.sqrt();
        for k in 0..8 {
            let ck = delta_k_coeffs(k).unwrap();
            let ck1 = delta_k_coeffs(k + 1).unwrap();
            let r = 1.7;
            let lhs = apply_delta_k(f, &ck1, r).unwrap();
            let rhs = apply_delta_k(f, &ck, r).unwrap()
                - 2f64.powi(k as i32 + 1) * apply_delta_k(f, &ck, r / 2.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()), "k={k}");
        }
    }

    #[test]
    fn next_power_is_not_annihilated() {
        // Closed form: Δ_k r^{k+1} = r^{k+1} Σ_j a_j 2^{-j(k+1)}.
        for k in 0..6 {
            let c = delta_k_coeffs(k).unwrap();
            let m = k as i32 + 1;
            let factor: f64 = c
                .as_f64()
                .iter()
                .enumerate()
                .map(|(j, a)| a * 0.5f64.powi(j as i32 * m))
                .sum();
            assert!(factor != 0.0);
            let r = 1.3;
            let got = apply_delta_k(|x| x.powi(m), &c, r).unwrap();
            assert!((got - r.powi(m) * factor).abs() < 1e-12 * r.powi(m) * c.l1());
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let c = delta_k_coeffs(1).unwrap();
        assert!(apply_delta_k(|r| 1.0 / (r - 0.5), &c, 1.0).is_err());
    }

    #[test]
    fn adjoint_indicator_identity() {
        let mut rng = seeded_rng(5);
        for k in 0..7 {
            let c = delta_k_coeffs(k).unwrap();
            for _ in 0..1000 {
                let x: f64 = rng.random_range(1e-3..10.0);
                let y: f64 = rng.random_range(1e-3..10.0);
                assert_eq!(delta_k_step_at(&c, x, y), delta_k_star_box_at(&c, x, y));
            }
        }
    }

    #[test]
    fn chk_values() {
        for h in 0..30 {
            assert_eq!(chk_coeff(h, 0), BigUint::one());
            assert_eq!(chk_coeff_u64(h, 1).unwrap(), (1u64 << (h + 1)) - 1);
        }
        // Independent oracle: brute-force enumeration of compositions for small h.
        fn brute(h: usize, k: usize) -> u64 {
            fn rec(rem: usize, j: usize, k: usize) -> u64 {
                if j > k {
                    return (rem == 0) as u64;
                }
                (0..=rem).map(|hj| (1u64 << (j * hj)) * rec(rem - hj, j + 1, k)).sum()
            }
            rec(h, 0, k)
        }
        for k in 0..4 {
            for h in 0..8 {
                assert_eq!(chk_coeff_u64(h, k).unwrap(), brute(h, k), "h={h} k={k}");
            }
        }
        assert!(matches!(
            chk_coeff_u64(40, 3),
            Err(SbeError::CoefficientOverflow { .. })
        ));
    }

    #[test]
    fn chk_bound() {
        for k in 0..=5 {
            let table = chk_table(20, k);
            for (h, c) in table.iter().enumerate() {
                let bound = BigUint::one() << (k + h * k);
                assert!(c <= &bound, "h={h} k={k}");
            }
        }
    }

    #[test]
    fn reconstruction() {
        let g = |r: f64| (-r * r).exp();
        assert!(reconstruction_residual(g, 0, 1.0, 40).unwrap() < 1e-12);
        assert_eq!(reconstruction_residual(|_| 0.0, 1, 1.0, 40).unwrap(), 0.0);
        let coarse = reconstruction_residual(g, 2, 0.01, 3).unwrap();
        let fine = reconstruction_residual(g, 2, 0.01, 40).unwrap();
        assert!(fine < coarse);
        assert!(fine < 1e-9, "{fine}");
        // Nonincreasing beyond a burn-in.
        let res: Vec<f64> = (0..12)
            .map(|h| reconstruction_residual(g, 1, 0.3, h).unwrap())
            .collect();
        for w in res[4..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn polynomial_annihilation() {
        assert!(polynomial_annihilation_error(6, 30, 11).unwrap() <= 1e-10);
    }

    #[test]
    fn double_double_horner() {
        let (hi, lo) = poly_eval_dd(&[1.0, 1.0], 1e-20);
        assert_eq!(hi, 1.0);
        assert_eq!(lo, 1e-20);
    }

    #[test]
    fn leibniz_identity() {
        assert_eq!(leibniz_coeffs(1).unwrap(), vec![1.0, -0.5]);
        assert!(leibniz_error(3).unwrap() < 1e-10);
    }

    #[test]
    fn selftest_passes() {
        for c in selftest(1).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn sbe_order_convention() {
        assert_eq!(sbe_order(0.4, 1), (1, false));
        assert_eq!(sbe_order(0.4, 2), (2, false));
        assert_eq!(sbe_order(1.0, 1), (1, true));
        assert_eq!(sbe_order(0.5, 2), (2, false));
    }
}
