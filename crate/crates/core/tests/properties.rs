use proptest::prelude::*;

use sbe_core::deltak::{apply_delta_k, delta_k_coeffs, delta_k_star_box_at, delta_k_step_at};
use sbe_core::norms::{p_variation_pow, sbe_norm, SbeParams};
use sbe_core::occupation::{brute_force_ball_mass, occupation, translate};
use sbe_core::process::{gen_gaussian, GaussianSpec};
use sbe_core::{OccupationMeasure, SmallBallIndex};

fn measure(atoms: Vec<f64>, dim: usize) -> OccupationMeasure {
    let n = atoms.len() / dim;
    OccupationMeasure::from_atoms(atoms[..n * dim].to_vec(), vec![1.0 / n as f64; n], dim, (0.0, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_agrees_with_brute_force(
        atoms in proptest::collection::vec(-2.0f64..2.0, 2..600),
        dim in 1usize..4,
        y in proptest::collection::vec(-2.0f64..2.0, 3),
        r in 0.0f64..3.0,
    ) {
        prop_assume!(atoms.len() >= dim);
        let mu = measure(atoms, dim);
        let index = SmallBallIndex::build(&mu);
        prop_assert_eq!(index.small_ball(r, &y[..dim]), brute_force_ball_mass(&mu, r, &y[..dim]));
    }

    #[test]
    fn ball_mass_is_translation_equivariant(
        atoms in proptest::collection::vec(-1.0f64..1.0, 4..200),
        k in -8i32..8,
        r in 0.01f64..1.0,
        y in -1.0f64..1.0,
    ) {
        // Lattice atoms and dyadic shifts keep every distance exact.
        let c = k as f64 / 8.0;
        let atoms = atoms.iter().map(|a| (a * 1048576.0).round() / 1048576.0).collect();
        let mu = measure(atoms, 1);
        let moved = translate(&mu, &[c]).unwrap();
        prop_assert_eq!(
            SmallBallIndex::build(&mu).small_ball(r, &[y]),
            SmallBallIndex::build(&moved).small_ball(r, &[y + c])
        );
    }

    #[test]
    fn adjoint_indicator_identity(k in 0usize..7, x in 1e-3f64..10.0, y in 1e-3f64..10.0) {
        let c = delta_k_coeffs(k).unwrap();
        prop_assert_eq!(delta_k_step_at(&c, x, y), delta_k_star_box_at(&c, x, y));
    }

    #[test]
    fn polynomials_up_to_degree_k_are_annihilated(
        k in 0usize..7,
        coeffs in proptest::collection::vec(-1.0f64..1.0, 7),
        e in -8i32..=8,
    ) {
        let c = delta_k_coeffs(k).unwrap();
        let r = 2f64.powi(e);
        let poly = |x: f64| coeffs[..=k].iter().rev().fold(0.0, |acc, a| acc * x + a);
        let scale = coeffs[..=k].iter().fold(0.0f64, |m, a| m.max(a.abs())) * r.max(1.0).powi(k as i32);
        // Floating evaluation of the polynomial itself limits the residual.
        let v = apply_delta_k(poly, &c, r).unwrap();
        prop_assert!(v.abs() <= 1e-10 * scale.max(1e-300) * c.l1(), "{v} at r = {r}");
    }

    #[test]
    fn p_variation_dominates_every_partition(
        v in proptest::collection::vec(-1.0f64..1.0, 2..40),
        mask in any::<u64>(),
        p in 1.0f64..4.0,
    ) {
        let best = p_variation_pow(v.len(), |i, j| (v[j] - v[i]).abs(), p);
        let mut last = 0;
        let mut s = 0.0;
        for i in 1..v.len() {
            if i == v.len() - 1 || mask >> (i % 64) & 1 == 1 {
                s += (v[i] - v[last]).abs().powf(p);
                last = i;
            }
        }
        prop_assert!(s <= best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn occupation_mass_is_additive(seed in any::<u64>(), u in 0.1f64..0.9) {
        let path = gen_gaussian(&GaussianSpec::brownian(2).unwrap(), 513, (0.0, 1.0), seed).unwrap();
        let whole = occupation(&path, 0.0, 1.0).unwrap();
        let left = occupation(&path, 0.0, u).unwrap();
        let right = occupation(&path, u, 1.0).unwrap();
        prop_assert!((left.total_mass() + right.total_mass() - whole.total_mass()).abs() < 1e-12);
        prop_assert!((whole.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), h in 0.1f64..0.9) {
        let spec = GaussianSpec::fbm(h, 1).unwrap();
        let a = gen_gaussian(&spec, 257, (0.0, 1.0), seed).unwrap();
        let b = gen_gaussian(&spec, 257, (0.0, 1.0), seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sbe_norm_is_translation_invariant(
        atoms in proptest::collection::vec(0.0f64..1.0, 20..120),
        k in -16i32..16,
    ) {
        // Atoms, shift and y-grid all live on a dyadic lattice, so every
        // distance is computed exactly in both configurations.
        let c = k as f64 / 16.0;
        let atoms = atoms.iter().map(|a| (a * 1048576.0).round() / 1048576.0).collect();
        let mu = measure(atoms, 1);
        let moved = translate(&mu, &[c]).unwrap();
        let params = SbeParams::new(0.3, 2.0, 2.0).with_r_range(1.0 / 1024.0, 1.0);
        let a = sbe_norm(&SmallBallIndex::build(&mu), &params.clone().with_y_box(vec![-4.0], vec![5.0], 2305)).unwrap().value;
        let b = sbe_norm(&SmallBallIndex::build(&moved), &params.with_y_box(vec![-4.0 + c], vec![5.0 + c], 2305)).unwrap().value;
        prop_assert!((a / b - 1.0).abs() < 1e-10, "{a} vs {b}");
    }
}
