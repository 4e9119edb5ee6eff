use aklt_gap::constants::{prefactor, threshold};
use aklt_gap::criterion::evaluate_criterion;
use aklt_gap::lattice::{build_patch_12, build_ring};
use aklt_gap::linalg::{dot, LinearOperator};
use aklt_gap::sector::{sector_dimension, HamiltonianSpec, SectorBasis, TotalSpinSquared};
use aklt_gap::spin::projector_spin3_polynomial;
use aklt_gap::vbs::boundary_multiplicities;
use proptest::prelude::*;

fn vector(dim: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sector_dimensions_partition_the_space(n in 1usize..=10) {
        let total: u64 = (-3 * n as i32..=3 * n as i32)
            .step_by(2)
            .map(|t| sector_dimension(n, t))
            .sum();
        prop_assert_eq!(total, 4u64.pow(n as u32));
    }

    #[test]
    fn sector_lookup_inverts_enumeration(n in 1usize..=8, k in 0i32..=24) {
        let two_m = 3 * n as i32 - 2 * (k % (3 * n as i32 + 1));
        let basis = SectorBasis::new(n, two_m).unwrap();
        prop_assert_eq!(basis.dim() as u64, sector_dimension(n, two_m));
        for (i, &w) in basis.states().iter().enumerate() {
            prop_assert_eq!(basis.index_of(w), Some(i));
        }
    }

    #[test]
    fn hamiltonian_is_symmetric_and_nonnegative(two_m in (-9i32..=9).prop_map(|k| 2 * k), seed in any::<u64>(), w in 0.5f64..2.0) {
        let ring = build_ring(w).unwrap();
        let basis = SectorBasis::new(6, two_m).unwrap();
        let spec = HamiltonianSpec::new(&ring, projector_spin3_polynomial());
        let h = spec.on(&basis);
        let x = vector(basis.dim(), seed);
        let y = vector(basis.dim(), seed ^ 0x9e37_79b9);
        let (mut hx, mut hy) = (vec![0.0; x.len()], vec![0.0; x.len()]);
        h.apply(&x, &mut hx);
        h.apply(&y, &mut hy);
        prop_assert!((dot(&y, &hx) - dot(&x, &hy)).abs() < 1e-10 * (1.0 + dot(&x, &hx).abs()));
        prop_assert!(dot(&x, &hx) >= -1e-10);
    }

    #[test]
    fn hamiltonian_commutes_with_total_spin(two_m in prop::sample::select(vec![24, 26, 28, 30]), seed in any::<u64>()) {
        let patch = build_patch_12(1.2).unwrap();
        let basis = SectorBasis::new(12, two_m).unwrap();
        let spec = HamiltonianSpec::new(&patch, projector_spin3_polynomial());
        let h = spec.on(&basis);
        let s2 = TotalSpinSquared::new(&basis).unwrap();
        let x = vector(basis.dim(), seed);
        let (mut a, mut b, mut t) = (vec![0.0; x.len()], vec![0.0; x.len()], vec![0.0; x.len()]);
        h.apply(&x, &mut t);
        s2.apply(&t, &mut a);
        s2.apply(&x, &mut t);
        h.apply(&t, &mut b);
        let err = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "commutator entry {}", err);
    }

    #[test]
    fn multiplicities_satisfy_the_sum_rule(n in 0usize..=20) {
        let t = boundary_multiplicities(n);
        let total: u128 = t.mult.iter().enumerate().map(|(j, &m)| (2 * j as u128 + 1) * m).sum();
        prop_assert_eq!(total, 3u128.pow(n as u32));
        prop_assert_eq!(t.mult.len(), n + 1);
    }

    #[test]
    fn bound_matches_its_composition(a in 1.0f64..4.0, gamma in 0.01f64..2.0) {
        let r = evaluate_criterion(a, gamma).unwrap();
        let t = (a * a - 2.0 * a + 3.0) / (10.0 + 4.0 * a);
        let c = (10.0 + 4.0 * a) / (3.0 * a * a + 2.0 * a + 7.0);
        prop_assert!((r.threshold - t).abs() < 1e-14);
        prop_assert!((threshold(a) - t).abs() < 1e-14);
        prop_assert!((prefactor(a) - c).abs() < 1e-14);
        prop_assert_eq!(r.certified, gamma > t);
        prop_assert!((r.bound - c * (gamma - t)).abs() < 1e-14);
    }
}
