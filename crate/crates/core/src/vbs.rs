//! Exact valence-bond ground states of open patches.
//!
//! Every site is built from three auxiliary spin-1/2s projected onto their
//! symmetric (spin-3/2) subspace. Each edge carries a singlet
//! `(|up,down> - |down,up>) / sqrt(2)`, oriented from the lower to the higher
//! site index. Auxiliary spins not used by an edge stay free and are put in
//! the symmetric state of definite `Sz` chosen by the boundary label, so a
//! pendant site contributes an effective spin 1.
//!
//! Amplitudes are obtained by sweeping the sites in an elimination order and
//! keeping a dense array over (configurations of swept sites) x (auxiliary
//! spins on bonds crossing the cut).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Patch;
use crate::linalg::{normalize, VectorSet};
use crate::sector::{expected_kernel_dimension, SectorBasis};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Default cap on intermediate amplitudes held during a contraction.
pub const DEFAULT_CONTRACTION_BUDGET: usize = 1 << 25;

/// Tolerance for linear dependence among valence-bond states.
pub const KERNEL_RANK_TOLERANCE: f64 = 1e-8;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Free spin of a boundary site and its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryLabel {
    pub site: usize,
    /// Number of unpaired auxiliary spins (2 for a pendant site).
    pub free_legs: usize,
    /// Twice the `Sz` of the free spin; `m = two_m / 2`.
    pub two_m: i32,
}

/// A normalized valence-bond state in its `Sz` sector.
#[derive(Debug, Clone)]
pub struct VbsState {
    pub labels: Vec<BoundaryLabel>,
    pub two_m: i32,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone)]
struct SitePlan {
    site: usize,
    /// Open-bond slots consumed by this site and whether the site is the
    /// lower endpoint of that bond.
    consumed: Vec<(usize, bool)>,
    /// Old slot -> new slot for bonds that stay open.
    kept: Vec<(usize, usize)>,
    /// Number of bonds to unswept neighbors opened by this site.
    opened: usize,
    open_before: usize,
    open_after: usize,
    free_legs: usize,
}

/// Contraction plan for one patch.
#[derive(Debug, Clone)]
pub struct VbsBuilder {
    n_sites: usize,
    order: Vec<usize>,
    plans: Vec<SitePlan>,
    boundary: Vec<(usize, usize)>,
    max_cut: usize,
    peak_entries: usize,
}

impl VbsBuilder {
    /// Plans a contraction; fails if the largest intermediate array would
    /// exceed `budget` amplitudes.
    pub fn new(patch: &Patch, budget: usize) -> Result<Self> {
        let n = patch.num_sites();
        let degrees = patch.degrees();
        if let Some(site) = degrees.iter().position(|&d| d > 3) {
            return Err(Error::InvalidParameter(format!(
                "site {site} has degree {} > 3",
                degrees[site]
            )));
        }
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|s| patch.neighbors(s).into_iter().map(|(t, _)| t).collect())
            .collect();

        let mut swept = vec![false; n];
        // open bonds as (swept endpoint, unswept endpoint)
        let mut open: Vec<(usize, usize)> = Vec::new();
        let mut order = Vec::with_capacity(n);
        let mut plans = Vec::with_capacity(n);
        let mut max_cut = 0;
        let mut peak_entries = 1usize;

        for step in 0..n {
            let next = (0..n)
                .filter(|&s| !swept[s])
                .min_by_key(|&s| {
                    let consumed = open.iter().filter(|b| b.1 == s).count();
                    let opened = neighbors[s].iter().filter(|&&t| !swept[t]).count();
                    (open.len() + opened - consumed, usize::MAX - consumed, s)
                })
                .expect("unswept site exists");

            let mut consumed = Vec::new();
            let mut kept = Vec::new();
            let mut remaining = Vec::new();
            for (slot, &(u, t)) in open.iter().enumerate() {
                if t == next {
                    consumed.push((slot, next < u));
                } else {
                    kept.push((slot, remaining.len()));
                    remaining.push((u, t));
                }
            }
            let new_bonds: Vec<(usize, usize)> = neighbors[next]
                .iter()
                .filter(|&&t| !swept[t])
                .map(|&t| (next, t))
                .collect();
            let plan = SitePlan {
                site: next,
                consumed,
                kept,
                opened: new_bonds.len(),
                open_before: open.len(),
                open_after: remaining.len() + new_bonds.len(),
                free_legs: 3 - degrees[next],
            };
            remaining.extend(new_bonds);
            open = remaining;
            max_cut = max_cut.max(open.len());
            let entries = 1usize
                .checked_shl(2 * (step as u32 + 1) + open.len() as u32)
                .unwrap_or(usize::MAX);
            peak_entries = peak_entries.max(entries);
            if entries > budget {
                return Err(Error::ContractionBudget { entries, budget });
            }
            swept[next] = true;
            order.push(next);
            plans.push(plan);
        }

        let boundary = (0..n)
            .filter(|&s| degrees[s] < 3)
            .map(|s| (s, 3 - degrees[s]))
            .collect();
        Ok(Self {
            n_sites: n,
            order,
            plans,
            boundary,
            max_cut,
            peak_entries,
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Largest number of bonds crossing the sweep front.
    pub fn max_cut(&self) -> usize {
        self.max_cut
    }

    pub fn peak_entries(&self) -> usize {
        self.peak_entries
    }

    /// Boundary sites and their numbers of free auxiliary spins.
    pub fn boundary(&self) -> &[(usize, usize)] {
        &self.boundary
    }

    /// All label assignments with total `2 Sz = two_m`, in lexicographic order.
    pub fn label_sets(&self, two_m: i32) -> Vec<Vec<BoundaryLabel>> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(self.boundary.len());
        self.collect_labels(0, two_m, &mut current, &mut out);
        out
    }

    fn collect_labels(
        &self,
        k: usize,
        remaining: i32,
        current: &mut Vec<BoundaryLabel>,
        out: &mut Vec<Vec<BoundaryLabel>>,
    ) {
        if k == self.boundary.len() {
            if remaining == 0 {
                out.push(current.clone());
            }
            return;
        }
        let capacity: i32 = self.boundary[k..].iter().map(|&(_, f)| f as i32).sum();
        if remaining.abs() > capacity {
            return;
        }
        let (site, f) = self.boundary[k];
        let f = f as i32;
        let mut t = f;
        while t >= -f {
            current.push(BoundaryLabel {
                site,
                free_legs: f as usize,
                two_m: t,
            });
            self.collect_labels(k + 1, remaining - t, current, out);
            current.pop();
            t -= 2;
        }
    }

    /// Contracts the network for the given labels and returns the
    /// (unnormalized) amplitudes in `basis`.
    pub fn amplitudes(&self, labels: &[BoundaryLabel], basis: &SectorBasis) -> Result<Vec<f64>> {
        if basis.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: basis.n_sites(),
            });
        }
        let mut label_of = vec![None; self.n_sites];
        for l in labels {
            let f = self
                .boundary
                .iter()
                .find(|b| b.0 == l.site)
                .map(|b| b.1)
                .ok_or_else(|| Error::InvalidParameter(format!("site {} has no free spin", l.site)))?;
            if l.two_m.abs() > f as i32 || (f as i32 - l.two_m) % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "label 2m = {} impossible for {f} free spins at site {}",
                    l.two_m, l.site
                )));
            }
            label_of[l.site] = Some(l.two_m);
        }
        if let Some(&(site, _)) = self.boundary.iter().find(|b| label_of[b.0].is_none()) {
            return Err(Error::InvalidParameter(format!("missing label for site {site}")));
        }

        let iso: Vec<f64> = (0..4).map(|k| 1.0 / binomial(3, k).sqrt()).collect();
        let mut psi = vec![1.0f64];
        for (step, plan) in self.plans.iter().enumerate() {
            let (free_downs, free_amp) = match plan.free_legs {
                0 => (0, 1.0),
                f => {
                    let two_m = label_of[plan.site].expect("checked above");
                    let downs = ((f as i32 - two_m) / 2) as usize;
                    (downs, binomial(f, downs).sqrt())
                }
            };
            let configs = 1usize << (2 * step);
            let mut next = vec![0.0f64; configs * 4 << plan.open_after];
            let open_mask = (1usize << plan.open_before) - 1;
            let kept_shift = plan.open_after - plan.opened;
            for (index, &amp) in psi.iter().enumerate() {
                if amp == 0.0 {
                    continue;
                }
                let c = index >> plan.open_before;
                let o = index & open_mask;
                let mut coeff = amp * free_amp;
                let mut downs = free_downs;
                for &(slot, site_is_lower) in &plan.consumed {
                    let a_other = (o >> slot) & 1;
                    // this site's leg is the opposite spin of the stored one
                    downs += 1 - a_other;
                    let first_up = if site_is_lower { a_other == 1 } else { a_other == 0 };
                    coeff *= if first_up { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                }
                let mut kept_bits = 0usize;
                for &(old, new) in &plan.kept {
                    kept_bits |= ((o >> old) & 1) << new;
                }
                for new_bits in 0..(1usize << plan.opened) {
                    let total = downs + new_bits.count_ones() as usize;
                    if total > 3 {
                        continue;
                    }
                    let c_new = (total << (2 * step)) | c;
                    let o_new = kept_bits | (new_bits << kept_shift);
                    next[(c_new << plan.open_after) | o_new] += coeff * iso[total];
                }
            }
            psi = next;
        }

        let mut out = vec![0.0; basis.dim()];
        for (c, &amp) in psi.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            let mut word = 0u32;
            for (t, &site) in self.order.iter().enumerate() {
                word |= (((c >> (2 * t)) & 3) as u32) << (2 * site);
            }
            let idx = basis.index_of(word).ok_or_else(|| {
                Error::Kernel(format!("valence-bond amplitude outside sector 2m = {}", basis.two_m()))
            })?;
            out[idx] = amp;
        }
        Ok(out)
    }

    /// Builds and normalizes one valence-bond state.
    pub fn build(&self, labels: &[BoundaryLabel], basis: &SectorBasis) -> Result<VbsState> {
        let mut amplitudes = self.amplitudes(labels, basis)?;
        if normalize(&mut amplitudes) == 0.0 {
            return Err(Error::Kernel("valence-bond state vanishes".into()));
        }
        Ok(VbsState {
            labels: labels.to_vec(),
            two_m: basis.two_m(),
            amplitudes,
        })
    }
}

/// Builds the valence-bond state with the given boundary labels.
///
/// The sector is fixed by the labels: `2 Sz = sum of label two_m`.
pub fn build_vbs_state(patch: &Patch, labels: &[BoundaryLabel]) -> Result<VbsState> {
    let builder = VbsBuilder::new(patch, DEFAULT_CONTRACTION_BUDGET)?;
    let two_m = labels.iter().map(|l| l.two_m).sum();
    let basis = SectorBasis::new(patch.num_sites(), two_m)?;
    builder.build(labels, &basis)
}

/// Labels assigning `m` to every pendant site of a patch.
pub fn uniform_pendant_labels(patch: &Patch, m: i32) -> Vec<BoundaryLabel> {
    patch
        .pendants
        .iter()
        .map(|&site| BoundaryLabel {
            site,
            free_legs: 2,
            two_m: 2 * m,
        })
        .collect()
}

/// Orthonormal basis of the valence-bond ground states in one sector.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub two_m: i32,
    pub vectors: VectorSet,
    /// Condition number of the normalized Gram matrix of the raw states.
    pub gram_condition: f64,
}

impl KernelBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Builds every valence-bond state of the sector and orthonormalizes them.
pub fn kernel_basis(patch: &Patch, basis: &SectorBasis) -> Result<KernelBasis> {
    let builder = VbsBuilder::new(patch, DEFAULT_CONTRACTION_BUDGET)?;
    kernel_basis_with(&builder, patch, basis)
}

pub fn kernel_basis_with(builder: &VbsBuilder, patch: &Patch, basis: &SectorBasis) -> Result<KernelBasis> {
    let sets = builder.label_sets(basis.two_m());
    let expected = expected_kernel_dimension(patch, basis.two_m());
    if sets.len() as u64 != expected {
        return Err(Error::Kernel(format!(
            "{} label sets but {expected} expected ground states",
            sets.len()
        )));
    }
    let mut vectors = VectorSet::with_capacity(basis.dim(), sets.len());
    for labels in &sets {
        let state = builder.build(labels, basis)?;
        vectors.push(&state.amplitudes);
    }
    let gram_condition = vectors.orthonormalize(KERNEL_RANK_TOLERANCE)?;
    Ok(KernelBasis {
        two_m: basis.two_m(),
        vectors,
        gram_condition,
    })
}

/// Number of total-spin-`J` multiplets in the product of `n` spin-1s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MultiplicityTable {
    pub n: usize,
    /// `mult[J]` for `J = 0..=n`.
    pub mult: Vec<u128>,
}

impl MultiplicityTable {
    pub fn get(&self, j: usize) -> u128 {
        self.mult.get(j).copied().unwrap_or(0)
    }

    /// `sum_J (2J + 1) mult(J)`, which must equal `3^n`.
    pub fn state_count(&self) -> u128 {
        self.mult
            .iter()
            .enumerate()
            .map(|(j, &m)| (2 * j as u128 + 1) * m)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,J,multiplicity\n");
        for (j, m) in self.mult.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.n, j, m));
        }
        out
    }
}

/// Couples `n` spin-1s one at a time: `1 x J = (J-1) + J + (J+1)`, with
/// `J = 0` only reachable from `J = 1`.
pub fn boundary_multiplicities(n: usize) -> MultiplicityTable {
    let mut mult: Vec<u128> = vec![1];
    for k in 1..=n {
        let prev = mult;
        mult = (0..=k)
            .map(|j| {
                let at = |i: usize| prev.get(i).copied().unwrap_or(0);
                if j == 0 {
                    at(1)
                } else {
                    at(j - 1) + at(j) + at(j + 1)
                }
            })
            .collect();
    }
    MultiplicityTable { n, mult }
}
