//! Deflated Lanczos against dense diagonalization built independently.

mod common;

use aklt_gap::eigensolver::LanczosConfig;
use aklt_gap::lattice::{build_patch_12, build_ring};
use aklt_gap::sector::{sector_dimension, HamiltonianSpec};
use aklt_gap::spectrum::{solve_sector, ScanConfig, SpinResolution};
use aklt_gap::spin::projector_spin3_polynomial;
use aklt_gap::vbs::{VbsBuilder, DEFAULT_CONTRACTION_BUDGET};

use common::*;

const MATCH: f64 = 1e-9;

fn plain(pairs: usize, max_basis: usize) -> ScanConfig {
    ScanConfig {
        lanczos: LanczosConfig {
            eigenpairs: pairs,
            max_basis: max_basis.max(8),
            keep: 24.min(max_basis.max(8) - 2),
            seed: 17,
            ..Default::default()
        },
        resolution: SpinResolution::Lowest,
        check_kernel: true,
    }
}

#[test]
fn reference_projector_is_a_rank_seven_projector() {
    let p = reference_projector();
    let p2 = &p * &p;
    let mut trace = 0.0;
    for i in 0..16 {
        trace += p[(i, i)];
        for j in 0..16 {
            assert!((p2[(i, j)] - p[(i, j)]).abs() < 1e-12);
        }
    }
    assert!((trace - 7.0).abs() < 1e-12);
}

#[test]
fn ring_spectrum_is_reproduced_sector_by_sector() {
    let ring = build_ring(1.0).unwrap();
    let dense = dense_eigenvalues(&dense_full_hamiltonian(&ring));
    assert_eq!(dense.len(), 4096);

    let spec = HamiltonianSpec::new(&ring, projector_spin3_polynomial());
    let builder = VbsBuilder::new(&ring, DEFAULT_CONTRACTION_BUDGET).unwrap();
    let mut union = Vec::with_capacity(4096);
    for two_m in (-18..=18).step_by(2) {
        let dim = sector_dimension(6, two_m) as usize;
        // ask for everything above the ground states: a complete check
        let sol = solve_sector(&spec, &builder, &ring, two_m, &plain(dim, dim)).unwrap();
        let s = sol.spectrum;
        assert_eq!(s.eigenvalues.len() + s.deflation_size, dim, "2m = {two_m}");
        assert!(s.kernel_residual.unwrap() < 1e-10);
        union.extend(std::iter::repeat(0.0).take(s.deflation_size));
        union.extend(s.eigenvalues);
    }
    union.sort_by(f64::total_cmp);
    let worst = union.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < MATCH, "largest deviation {worst:e}");
}

#[test]
fn restarted_run_matches_dense_on_the_ring() {
    let ring = build_ring(1.0).unwrap();
    let dense = dense_eigenvalues(&dense_sector_hamiltonian(&ring, 0));
    let spec = HamiltonianSpec::new(&ring, projector_spin3_polynomial());
    let builder = VbsBuilder::new(&ring, DEFAULT_CONTRACTION_BUDGET).unwrap();
    let sol = solve_sector(&spec, &builder, &ring, 0, &plain(12, 40)).unwrap();
    let zeros = dense.iter().filter(|&&e| e < 1e-8).count();
    assert_eq!(zeros, sol.kernel.len());
    for (k, e) in sol.spectrum.eigenvalues.iter().enumerate() {
        assert!(
            (e - dense[zeros + k]).abs() < MATCH,
            "level {k}: {e} vs {}",
            dense[zeros + k]
        );
    }
}

#[test]
fn cluster_top_sectors_match_dense() {
    let patch = build_patch_12(1.2).unwrap();
    let spec = HamiltonianSpec::new(&patch, projector_spin3_polynomial());
    let builder = VbsBuilder::new(&patch, DEFAULT_CONTRACTION_BUDGET).unwrap();
    for two_m in [36, 34, 32, 30, 28, 26, -26, -30] {
        let dense = dense_eigenvalues(&dense_sector_hamiltonian(&patch, two_m));
        let zeros = dense.iter().filter(|&&e| e < 1e-8).count();
        let pairs = 6.min(dense.len() - zeros);
        let sol = solve_sector(&spec, &builder, &patch, two_m, &plain(pairs, 64)).unwrap();
        assert_eq!(zeros, sol.kernel.len(), "2m = {two_m}");
        for (k, e) in sol.spectrum.eigenvalues.iter().enumerate() {
            let d = dense[zeros + k];
            assert!((e - d).abs() < MATCH, "2m = {two_m}, level {k}: {e} vs {d}");
        }
    }
}
