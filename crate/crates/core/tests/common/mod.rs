//! Reference implementations used only by the tests. They share no code
//! with the library beyond the patch description.

#![allow(dead_code)]

use std::collections::HashMap;

use aklt_gap::lattice::Patch;
use faer::{Mat, Side};

/// Spin-3/2 matrices `(Sz, S+)` in the basis `m = 3/2, 1/2, -1/2, -3/2`.
pub fn spin_three_halves() -> ([f64; 4], [[f64; 4]; 4]) {
    let m: [f64; 4] = [1.5, 0.5, -0.5, -1.5];
    let mut sp = [[0.0; 4]; 4];
    for k in 1..4 {
        let mk = m[k];
        sp[k - 1][k] = (3.75 - mk * (mk + 1.0)).sqrt();
    }
    (m, sp)
}

/// Two-site projector onto total spin 3 built by Lagrange interpolation in
/// the pair Casimir, pair index `4 * a + b`.
pub fn reference_projector() -> Mat<f64> {
    let (m, sp) = spin_three_halves();
    let mut sm = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            sm[i][j] = sp[j][i];
        }
    }
    let id = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let sz = |i: usize, j: usize| if i == j { m[i] } else { 0.0 };
    // total generators on the pair
    let tz = Mat::from_fn(16, 16, |r, c| {
        let (a, b, x, y) = (r / 4, r % 4, c / 4, c % 4);
        sz(a, x) * id(b, y) + id(a, x) * sz(b, y)
    });
    let tp = Mat::from_fn(16, 16, |r, c| {
        let (a, b, x, y) = (r / 4, r % 4, c / 4, c % 4);
        sp[a][x] * id(b, y) + id(a, x) * sp[b][y]
    });
    let tm = tp.transpose().to_owned();
    let casimir = &tz * &tz + (&tp * &tm + &tm * &tp) * faer::Scale(0.5);
    let eye = Mat::<f64>::identity(16, 16);
    let mut p = eye.clone();
    for s in [0.0f64, 1.0, 2.0] {
        let l = s * (s + 1.0);
        p = &p * (&casimir - &eye * faer::Scale(l)) * faer::Scale(1.0 / (12.0 - l));
    }
    p
}

/// Words of the sector with level sum fixed, in increasing order.
pub fn sector_words(n: usize, two_m: i32) -> Vec<u32> {
    let target = 3 * n as i32 - two_m;
    if target < 0 || target % 2 != 0 {
        return Vec::new();
    }
    let target = (target / 2) as u32;
    (0..(1u64 << (2 * n)) as u32)
        .filter(|&w| (0..n).map(|i| (w >> (2 * i)) & 3).sum::<u32>() == target)
        .collect()
}

/// Dense sector Hamiltonian assembled entry by entry.
pub fn dense_sector_hamiltonian(patch: &Patch, two_m: i32) -> Mat<f64> {
    dense_hamiltonian(patch, &sector_words(patch.num_sites(), two_m))
}

/// Dense Hamiltonian on the whole product space.
pub fn dense_full_hamiltonian(patch: &Patch) -> Mat<f64> {
    let words: Vec<u32> = (0..(1u64 << (2 * patch.num_sites())) as u32).collect();
    dense_hamiltonian(patch, &words)
}

/// Matrix of the Hamiltonian on the span of `words`, which must be closed
/// under the bond terms.
pub fn dense_hamiltonian(patch: &Patch, words: &[u32]) -> Mat<f64> {
    let index: HashMap<u32, usize> = words.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let p = reference_projector();
    let mut h = Mat::<f64>::zeros(words.len(), words.len());
    for (col, &w) in words.iter().enumerate() {
        for e in &patch.edges {
            let (a, b) = ((w >> (2 * e.u)) & 3, (w >> (2 * e.v)) & 3);
            let input = (4 * a + b) as usize;
            for out in 0..16 {
                let amp = p[(out, input)];
                if amp.abs() < 1e-15 {
                    continue;
                }
                let (x, y) = ((out / 4) as u32, (out % 4) as u32);
                let mut v = w & !(3 << (2 * e.u)) & !(3 << (2 * e.v));
                v |= (x << (2 * e.u)) | (y << (2 * e.v));
                if let Some(&row) = index.get(&v) {
                    h[(row, col)] += e.weight * amp;
                }
            }
        }
    }
    h
}

pub fn dense_eigenvalues(h: &Mat<f64>) -> Vec<f64> {
    h.self_adjoint_eigenvalues(Side::Lower).expect("dense eigenvalues")
}

/// Distinct levels above `zero`, merged within `merge`.
pub fn distinct_levels(values: &[f64], zero: f64, merge: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        if v < zero {
            continue;
        }
        if out.last().map_or(true, |&l| v - l > merge) {
            out.push(v);
        }
    }
    out
}
