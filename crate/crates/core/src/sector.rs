//! Fixed total-`Sz` subspaces of `(C^4)^n` and matrix-free operators on them.
//!
//! A configuration is a word with two bits per site; site `i` occupies bits
//! `2i..2i+2` and stores the local level `l = 0..3`, i.e. `m = 3/2 - l`.
//! A sector is labelled by twice its total `Sz`, `two_m = 3n - 2 * sum(l)`.
//!
//! Lookups use a split table: the word is cut into a high and a low half,
//! and the position of a state is `offset[high] + rank[low]`, which is exact
//! because states are enumerated in increasing word order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Patch;
use crate::linalg::LinearOperator;
use crate::spin::{PairTransitions, TwoSiteProjector};

/// Largest site count supported by the split lookup tables.
pub const MAX_SITES: usize = 16;
const ROW_CHUNK: usize = 1024;

#[inline]
fn level(word: u32, site: usize) -> u32 {
    (word >> (2 * site)) & 3
}

#[inline]
fn with_level(word: u32, site: usize, l: u32) -> u32 {
    (word & !(3 << (2 * site))) | (l << (2 * site))
}

fn level_sum(word: u32, sites: usize) -> u32 {
    (0..sites).map(|i| level(word, i)).sum()
}

/// Ordered basis of one `Sz` sector with exact inverse lookup.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    n_sites: usize,
    two_m: i32,
    target_sum: u32,
    states: Vec<u32>,
    low_sites: usize,
    low_sum: Vec<u8>,
    low_rank: Vec<u32>,
    high_sum: Vec<u8>,
    high_offset: Vec<u32>,
}

/// Enumerates the sector `two_m` of an `n`-site spin-3/2 system.
///
/// Sectors with the wrong parity or outside `|two_m| <= 3n` are empty.
pub fn enumerate_sector(patch: &Patch, two_m: i32) -> Result<SectorBasis> {
    SectorBasis::new(patch.num_sites(), two_m)
}

impl SectorBasis {
    pub fn new(n_sites: usize, two_m: i32) -> Result<Self> {
        if n_sites > MAX_SITES {
            return Err(Error::TooManySites {
                sites: n_sites,
                max: MAX_SITES,
            });
        }
        let low_sites = n_sites / 2;
        let high_sites = n_sites - low_sites;
        let max = 3 * n_sites as i64;
        let diff = max - two_m as i64;
        let valid = diff >= 0 && diff % 2 == 0 && diff / 2 <= max;
        let target_sum = if valid { (diff / 2) as u32 } else { u32::MAX };

        let low_count = 1usize << (2 * low_sites);
        let high_count = 1usize << (2 * high_sites);
        let low_sum: Vec<u8> = (0..low_count as u32).map(|w| level_sum(w, low_sites) as u8).collect();
        let high_sum: Vec<u8> = (0..high_count as u32).map(|w| level_sum(w, high_sites) as u8).collect();

        let mut by_sum: Vec<Vec<u32>> = vec![Vec::new(); 3 * low_sites + 1];
        let mut low_rank = vec![0u32; low_count];
        for w in 0..low_count as u32 {
            let s = low_sum[w as usize] as usize;
            low_rank[w as usize] = by_sum[s].len() as u32;
            by_sum[s].push(w);
        }

        let mut states = Vec::new();
        let mut high_offset = vec![u32::MAX; high_count];
        if valid {
            for h in 0..high_count as u32 {
                let hs = high_sum[h as usize] as u32;
                if hs > target_sum {
                    continue;
                }
                let need = (target_sum - hs) as usize;
                if need >= by_sum.len() {
                    continue;
                }
                high_offset[h as usize] = states.len() as u32;
                let shift = 2 * low_sites;
                states.extend(by_sum[need].iter().map(|&l| (h << shift) | l));
            }
        }

        Ok(Self {
            n_sites,
            two_m,
            target_sum,
            states,
            low_sites,
            low_sum,
            low_rank,
            high_sum,
            high_offset,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn two_m(&self) -> i32 {
        self.two_m
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Position of `word`, or `None` if it is not in this sector.
    pub fn index_of(&self, word: u32) -> Option<usize> {
        if self.n_sites < 16 && word >> (2 * self.n_sites) != 0 {
            return None;
        }
        let low = (word & ((1u32 << (2 * self.low_sites)) - 1)) as usize;
        let high = (word as u64 >> (2 * self.low_sites)) as usize;
        if self.low_sum[low] as u32 + self.high_sum[high] as u32 != self.target_sum {
            return None;
        }
        Some(self.high_offset[high] as usize + self.low_rank[low] as usize)
    }

    /// Lookup for words known to lie in the sector.
    #[inline]
    fn index_unchecked(&self, word: u32) -> usize {
        let low = (word & ((1u32 << (2 * self.low_sites)) - 1)) as usize;
        let high = (word as u64 >> (2 * self.low_sites)) as usize;
        self.high_offset[high] as usize + self.low_rank[low] as usize
    }

    /// Twice the total `Sz` of a configuration word.
    pub fn two_m_of(&self, word: u32) -> i32 {
        3 * self.n_sites as i32 - 2 * level_sum(word, self.n_sites) as i32
    }
}

/// Number of configurations of `n` spin-3/2 sites with total `2 Sz = two_m`.
pub fn sector_dimension(n_sites: usize, two_m: i32) -> u64 {
    // coefficients of (x^3 + x + x^-1 + x^-3)^n indexed by (two_m + 3n)
    let mut counts = vec![1u64];
    for _ in 0..n_sites {
        let mut next = vec![0u64; counts.len() + 6];
        for (k, &c) in counts.iter().enumerate() {
            for step in [0, 2, 4, 6] {
                next[k + step] += c;
            }
        }
        counts = next;
    }
    let idx = two_m as i64 + 3 * n_sites as i64;
    if idx < 0 || idx as usize >= counts.len() {
        0
    } else {
        counts[idx as usize]
    }
}

/// Number of valence-bond ground states with total `2 Sz = two_m`.
///
/// A site with `f = 3 - degree` unpaired auxiliary spins carries a free spin
/// `f / 2`; for pendant sites that is a spin 1 with `m in {-1, 0, 1}`.
pub fn expected_kernel_dimension(patch: &Patch, two_m: i32) -> u64 {
    let free: Vec<usize> = patch.degrees().iter().filter(|&&d| d < 3).map(|&d| 3 - d).collect();
    // counts indexed by (sum of two_m) + offset
    let offset: usize = free.iter().sum();
    let mut counts = vec![0u64; 2 * offset + 1];
    counts[offset] = 1;
    for &f in &free {
        let mut next = vec![0u64; counts.len()];
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for step in 0..=f {
                let shift = 2 * step as i64 - f as i64;
                let t = k as i64 + shift;
                if t >= 0 && (t as usize) < next.len() {
                    next[t as usize] += c;
                }
            }
        }
        counts = next;
    }
    let idx = two_m as i64 + offset as i64;
    if idx < 0 || idx as usize >= counts.len() {
        0
    } else {
        counts[idx as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorRow {
    pub two_m: i32,
    pub dimension: u64,
    pub expected_kernel_dimension: u64,
}

/// Sector dimensions and kernel counts for every `two_m` from `3n` down to `-3n`.
pub fn sector_table(patch: &Patch) -> Vec<SectorRow> {
    let n = patch.num_sites() as i32;
    (-3 * n..=3 * n)
        .rev()
        .filter(|t| (3 * n - t) % 2 == 0)
        .map(|two_m| SectorRow {
            two_m,
            dimension: sector_dimension(patch.num_sites(), two_m),
            expected_kernel_dimension: expected_kernel_dimension(patch, two_m),
        })
        .collect()
}

pub fn sector_table_csv(rows: &[SectorRow]) -> String {
    let mut out = String::from("two_m,dimension,expected_kernel_dimension\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.two_m, r.dimension, r.expected_kernel_dimension
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// `H = sum_e w_e P_e` on a patch.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    pub projector: TwoSiteProjector,
    transitions: PairTransitions,
}

impl HamiltonianSpec {
    pub fn new(patch: &Patch, projector: TwoSiteProjector) -> Self {
        let bonds = patch
            .edges
            .iter()
            .map(|e| Bond {
                i: e.u,
                j: e.v,
                weight: e.weight,
            })
            .collect();
        let transitions = projector.transitions(1e-15);
        Self {
            n_sites: patch.num_sites(),
            bonds,
            projector,
            transitions,
        }
    }

    /// Upper bound on the operator norm, `sum_e |w_e|`.
    pub fn norm_bound(&self) -> f64 {
        self.bonds.iter().map(|b| b.weight.abs()).sum()
    }

    fn row(&self, basis: &SectorBasis, index: usize, v: &[f64]) -> f64 {
        let word = basis.states[index];
        let mut acc = 0.0;
        for bond in &self.bonds {
            let a = level(word, bond.i);
            let b = level(word, bond.j);
            let mut local = 0.0;
            for &(a2, b2, value) in &self.transitions.rows[(4 * a + b) as usize] {
                let (a2, b2) = (a2 as u32, b2 as u32);
                let target = if a2 == a && b2 == b {
                    index
                } else {
                    basis.index_unchecked(with_level(with_level(word, bond.i, a2), bond.j, b2))
                };
                local += value * v[target];
            }
            acc += bond.weight * local;
        }
        acc
    }

    /// `y = H v` on the sector; `y` is overwritten.
    pub fn apply_into(&self, basis: &SectorBasis, v: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(basis.dim(), v.len())?;
        check_len(basis.dim(), y.len())?;
        if basis.n_sites != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: basis.n_sites,
            });
        }
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, ys)| {
            let base = c * ROW_CHUNK;
            for (k, out) in ys.iter_mut().enumerate() {
                *out = self.row(basis, base + k, v);
            }
        });
        Ok(())
    }

    pub fn on<'a>(&'a self, basis: &'a SectorBasis) -> SectorHamiltonian<'a> {
        SectorHamiltonian { spec: self, basis }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Returns `H v` for a vector in the sector.
pub fn apply_hamiltonian(h: &HamiltonianSpec, basis: &SectorBasis, v: &[f64]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; basis.dim()];
    h.apply_into(basis, v, &mut y)?;
    Ok(y)
}

/// A Hamiltonian bound to one sector.
#[derive(Clone, Copy)]
pub struct SectorHamiltonian<'a> {
    pub spec: &'a HamiltonianSpec,
    pub basis: &'a SectorBasis,
}

impl LinearOperator for SectorHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spec
            .apply_into(self.basis, x, y)
            .expect("vector length matches sector");
    }
}

/// `<m+1| S^+ |m>` for a spin-3/2 site at level `l` (raising to `l - 1`).
const RAISE: [f64; 4] = [0.0, 1.732_050_807_568_877_2, 2.0, 1.732_050_807_568_877_2];

/// Total `S^2` on a sector, applied as `S^- S^+ + Sz (Sz + 1)`.
#[derive(Debug, Clone)]
pub struct TotalSpinSquared<'a> {
    basis: &'a SectorBasis,
    upper: Option<SectorBasis>,
    diagonal: f64,
}

impl<'a> TotalSpinSquared<'a> {
    pub fn new(basis: &'a SectorBasis) -> Result<Self> {
        let upper = SectorBasis::new(basis.n_sites, basis.two_m + 2)?;
        let m = basis.two_m as f64 / 2.0;
        Ok(Self {
            basis,
            upper: (!upper.is_empty()).then_some(upper),
            diagonal: m * (m + 1.0),
        })
    }

    pub fn apply_into(&self, v: &[f64], y: &mut [f64]) -> Result<()> {
        let basis = self.basis;
        check_len(basis.dim(), v.len())?;
        check_len(basis.dim(), y.len())?;
        let n = basis.n_sites;
        let Some(upper) = &self.upper else {
            y.iter_mut().zip(v).for_each(|(yi, vi)| *yi = self.diagonal * vi);
            return Ok(());
        };
        // u = S+ v, gathered over the upper sector
        let mut u = vec![0.0; upper.dim()];
        u.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, us)| {
            for (k, out) in us.iter_mut().enumerate() {
                let word = upper.states[c * ROW_CHUNK + k];
                let mut acc = 0.0;
                for site in 0..n {
                    let l = level(word, site);
                    if l < 3 {
                        let src = basis.index_unchecked(with_level(word, site, l + 1));
                        acc += RAISE[(l + 1) as usize] * v[src];
                    }
                }
                *out = acc;
            }
        });
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, ys)| {
            for (k, out) in ys.iter_mut().enumerate() {
                let index = c * ROW_CHUNK + k;
                let word = basis.states[index];
                let mut acc = self.diagonal * v[index];
                for site in 0..n {
                    let l = level(word, site);
                    if l > 0 {
                        let src = upper.index_unchecked(with_level(word, site, l - 1));
                        acc += RAISE[l as usize] * u[src];
                    }
                }
                *out = acc;
            }
        });
        Ok(())
    }
}

impl LinearOperator for TotalSpinSquared<'_> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y).expect("vector length matches sector");
    }
}

/// Returns `S^2 v` for a vector in the sector.
pub fn apply_total_spin_squared(basis: &SectorBasis, v: &[f64]) -> Result<Vec<f64>> {
    let op = TotalSpinSquared::new(basis)?;
    let mut y = vec![0.0; basis.dim()];
    op.apply_into(v, &mut y)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_patch_12, build_ring};
    use crate::linalg::dot;
    use crate::spin::projector_spin3_polynomial;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn twelve_site_small_sectors() {
        let p = build_patch_12(1.2).unwrap();
        assert_eq!(enumerate_sector(&p, 36).unwrap().dim(), 1);
        assert_eq!(enumerate_sector(&p, 34).unwrap().dim(), 12);
        assert_eq!(enumerate_sector(&p, 35).unwrap().dim(), 0);
        assert_eq!(enumerate_sector(&p, 38).unwrap().dim(), 0);
    }

    #[test]
    fn lookup_inverts_enumeration() {
        for (n, two_m) in [(6, 0), (7, 3), (5, -5), (1, 1)] {
            let b = SectorBasis::new(n, two_m).unwrap();
            for (i, &w) in b.states().iter().enumerate() {
                assert_eq!(b.index_of(w), Some(i));
                assert_eq!(b.two_m_of(w), two_m);
            }
            assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        }
        let b = SectorBasis::new(6, 0).unwrap();
        assert_eq!(b.index_of(0), None);
    }

    #[test]
    fn dimension_sum_rule() {
        for n in 1..=8usize {
            let total: u64 = (-3 * n as i32..=3 * n as i32)
                .map(|t| SectorBasis::new(n, t).unwrap().dim() as u64)
                .sum();
            assert_eq!(total, 4u64.pow(n as u32));
        }
    }

    #[test]
    fn rejects_large_patches() {
        assert!(matches!(SectorBasis::new(17, 0), Err(Error::TooManySites { .. })));
    }

    #[test]
    fn kernel_counts() {
        let p = build_patch_12(1.2).unwrap();
        assert_eq!(expected_kernel_dimension(&p, 0), 141);
        assert_eq!(expected_kernel_dimension(&p, 12), 1);
        assert_eq!(expected_kernel_dimension(&p, 10), 6);
        assert_eq!(expected_kernel_dimension(&p, 14), 0);
        assert_eq!(expected_kernel_dimension(&p, 1), 0);
        let total: u64 = sector_table(&p).iter().map(|r| r.expected_kernel_dimension).sum();
        assert_eq!(total, 729);
        let ring = build_ring(1.0).unwrap();
        let total: u64 = sector_table(&ring).iter().map(|r| r.expected_kernel_dimension).sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn single_bond_top_state() {
        let p = build_patch_12(1.0).unwrap();
        let mut single = p.clone();
        single.sites.truncate(2);
        single.edges = vec![crate::lattice::PatchEdge {
            u: 0,
            v: 1,
            weight: 1.0,
            weighted: false,
            role: crate::lattice::EdgeRole::Central,
            lattice_edge: None,
        }];
        let h = HamiltonianSpec::new(&single, projector_spin3_polynomial());
        let b = enumerate_sector(&single, 6).unwrap();
        let y = apply_hamiltonian(&h, &b, &[1.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn hamiltonian_is_symmetric_and_positive() {
        let p = build_patch_12(1.2).unwrap();
        let h = HamiltonianSpec::new(&p, projector_spin3_polynomial());
        let b = enumerate_sector(&p, 24).unwrap();
        let u = random_vec(b.dim(), 1);
        let v = random_vec(b.dim(), 2);
        let hu = apply_hamiltonian(&h, &b, &u).unwrap();
        let hv = apply_hamiltonian(&h, &b, &v).unwrap();
        let lhs = dot(&u, &hv);
        let rhs = dot(&hu, &v);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        assert!(dot(&v, &hv) >= 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = build_patch_12(1.2).unwrap();
        let h = HamiltonianSpec::new(&p, projector_spin3_polynomial());
        let b = enumerate_sector(&p, 30).unwrap();
        assert!(matches!(
            apply_hamiltonian(&h, &b, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(apply_total_spin_squared(&b, &[1.0]).is_err());
    }

    #[test]
    fn top_state_total_spin() {
        for n in [2usize, 6, 12] {
            let b = SectorBasis::new(n, 3 * n as i32).unwrap();
            let y = apply_total_spin_squared(&b, &[1.0]).unwrap();
            let s = 1.5 * n as f64;
            assert!((y[0] - s * (s + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn spin_squared_commutes_with_hamiltonian() {
        let p = build_patch_12(1.2).unwrap();
        let h = HamiltonianSpec::new(&p, projector_spin3_polynomial());
        let b = enumerate_sector(&p, 26).unwrap();
        let s2 = TotalSpinSquared::new(&b).unwrap();
        let v = random_vec(b.dim(), 3);
        let mut t1 = vec![0.0; b.dim()];
        let mut t2 = vec![0.0; b.dim()];
        s2.apply_into(&v, &mut t1).unwrap();
        let hs = apply_hamiltonian(&h, &b, &t1).unwrap();
        let hv = apply_hamiltonian(&h, &b, &v).unwrap();
        s2.apply_into(&hv, &mut t2).unwrap();
        let diff: f64 = hs.iter().zip(&t2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-9 * crate::linalg::norm(&v));
    }
}
