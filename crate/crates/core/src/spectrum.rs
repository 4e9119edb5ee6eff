//! Per-sector excitation spectra and the table of gaps by total spin.
//!
//! Each `Sz` sector is deflated by its valence-bond ground states and the
//! lowest remaining eigenpairs are computed and labelled by total spin. In
//! highest-weight mode the operator is `H + mu S^- S^+`: the penalty is zero
//! exactly on states with `J = |m|` and shifts every other multiplet up, so
//! sector `m` yields the lowest spin-`|m|` excitations and scanning `m >= 0`
//! visits every multiplet once.
//!
//! `mu` is chosen per sector so that the `J = |m| + 1` multiplets move up by
//! the configured penalty. A larger `mu` would separate spins further but
//! stretches the spectrum, and Lanczos pays for the width.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{lanczos_smallest, DeflatedLanczos, Eigenpairs, LanczosConfig};
use crate::error::{Error, Result};
use crate::lattice::Patch;
use crate::linalg::{axpy, dot, norm, symmetric_eigen, FnOperator, LinearOperator, VectorSet};
use crate::sector::{expected_kernel_dimension, sector_dimension, HamiltonianSpec, SectorBasis, TotalSpinSquared};
use crate::spin::projector_spin3_polynomial;
use crate::vbs::{kernel_basis_with, KernelBasis, VbsBuilder, DEFAULT_CONTRACTION_BUDGET};

/// Tolerance on `|<S^2> - J(J+1)|` for a spin label.
pub const SPIN_TOLERANCE: f64 = 1e-6;
/// Eigenvalues closer than this are treated as one multiplet when labelling.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;
/// Eigenvalues below this count as zero modes.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-8;
/// Default lift of the `J = |m| + 1` multiplets in highest-weight mode.
pub const DEFAULT_PENALTY: f64 = 0.05;
/// Pairs beyond the request allowed while looking for a `J = |m|` state.
pub const HIGHEST_WEIGHT_EXTRA: usize = 4;
/// Attempts in highest-weight mode; each one multiplies the penalty by 4.
pub const PENALTY_ATTEMPTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SpinResolution {
    /// Lowest eigenpairs of `H` itself.
    Lowest,
    /// Lowest eigenpairs of `H + mu S^- S^+`, where `penalty` is the
    /// energy added to the `J = |m| + 1` multiplets.
    HighestWeight { penalty: f64 },
}

impl Default for SpinResolution {
    fn default() -> Self {
        SpinResolution::HighestWeight {
            penalty: DEFAULT_PENALTY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub lanczos: LanczosConfig,
    pub resolution: SpinResolution,
    /// Compute `|H psi|` for every kernel vector.
    pub check_kernel: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            lanczos: LanczosConfig::default(),
            resolution: SpinResolution::default(),
            check_kernel: true,
        }
    }
}

/// Lowest excitations of one sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub two_m: i32,
    pub dimension: usize,
    pub eigenvalues: Vec<f64>,
    pub s2: Vec<f64>,
    pub spins: Vec<f64>,
    pub residuals: Vec<f64>,
    pub deflation_size: usize,
    pub expected_kernel: u64,
    /// Largest `|H psi|` over the orthonormal kernel basis, if checked.
    pub kernel_residual: Option<f64>,
    /// Eigenvalues found below the zero-mode tolerance after deflation.
    pub extra_zero_modes: usize,
    /// Penalty that produced the pairs in highest-weight mode.
    pub penalty: Option<f64>,
    pub matvecs: usize,
    pub seconds: f64,
}

impl SpectrumResult {
    pub fn zero_modes(&self) -> usize {
        self.deflation_size + self.extra_zero_modes
    }
}

/// A solved sector with its vectors, for callers that need them.
pub struct SectorSolution {
    pub spectrum: SpectrumResult,
    pub kernel: KernelBasis,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Total spin for `<S^2> = s2`, allowing half-integers.
pub fn spin_label(s2: f64) -> Result<f64> {
    let raw = ((1.0 + 4.0 * s2.max(0.0)).sqrt() - 1.0) / 2.0;
    let j = (2.0 * raw).round() / 2.0;
    let deviation = (s2 - j * (j + 1.0)).abs();
    if deviation > SPIN_TOLERANCE {
        return Err(Error::AmbiguousSpin {
            s2,
            nearest: j,
            deviation,
        });
    }
    Ok(j)
}

/// Rotates near-degenerate groups of eigenvectors onto `S^2` eigenstates,
/// then recomputes energies and residuals with `h`.
///
/// Returns `(<S^2>, J)` per eigenpair.
pub fn classify_spins<H, S>(h: &H, s2: &S, pairs: &mut Eigenpairs) -> Result<(Vec<f64>, Vec<f64>)>
where
    H: LinearOperator + ?Sized,
    S: LinearOperator + ?Sized,
{
    let count = pairs.len();
    let n = h.dim();
    let mut start = 0;
    while start < count {
        let mut end = start + 1;
        while end < count && pairs.values[end] - pairs.values[end - 1] <= CLUSTER_TOLERANCE {
            end += 1;
        }
        if end - start > 1 {
            let k = end - start;
            let mut applied = Vec::with_capacity(k);
            for a in start..end {
                let mut y = vec![0.0; n];
                s2.apply(&pairs.vectors[a], &mut y);
                applied.push(y);
            }
            let m = DMatrix::from_fn(k, k, |a, b| {
                0.5 * (dot(&pairs.vectors[start + a], &applied[b]) + dot(&pairs.vectors[start + b], &applied[a]))
            });
            let (_, rotation) = symmetric_eigen(&m)?;
            let rotated: Vec<Vec<f64>> = (0..k)
                .map(|c| {
                    let mut x = vec![0.0; n];
                    for a in 0..k {
                        axpy(rotation[(a, c)], &pairs.vectors[start + a], &mut x);
                    }
                    x
                })
                .collect();
            for (offset, x) in rotated.into_iter().enumerate() {
                pairs.vectors[start + offset] = x;
            }
        }
        start = end;
    }

    let mut s2_values = Vec::with_capacity(count);
    let mut spins = Vec::with_capacity(count);
    let mut y = vec![0.0; n];
    for k in 0..count {
        let x = &mut pairs.vectors[k];
        crate::linalg::normalize(x);
        h.apply(x, &mut y);
        let energy = dot(x, &y);
        axpy(-energy, x, &mut y);
        pairs.values[k] = energy;
        pairs.residuals[k] = norm(&y);
        s2.apply(x, &mut y);
        let s = dot(x, &y);
        spins.push(spin_label(s)?);
        s2_values.push(s);
    }
    // energies may have moved by rounding after rotation; keep ascending order
    let mut idx: Vec<usize> = (0..count).collect();
    idx.sort_by(|&a, &b| {
        pairs.values[a]
            .total_cmp(&pairs.values[b])
            .then(spins[a].total_cmp(&spins[b]))
    });
    let permute = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    pairs.values = permute(&pairs.values);
    pairs.residuals = permute(&pairs.residuals);
    let mut vectors = std::mem::take(&mut pairs.vectors);
    pairs.vectors = idx.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();
    Ok((permute(&s2_values), permute(&spins)))
}

/// Largest `|H v|` over a set of vectors.
pub fn kernel_residual<Op: LinearOperator + ?Sized>(h: &Op, kernel: &VectorSet) -> f64 {
    let mut y = vec![0.0; h.dim()];
    let mut worst = 0.0f64;
    for v in kernel.iter() {
        h.apply(v, &mut y);
        worst = worst.max(norm(&y));
    }
    worst
}

/// Lowest pairs of a penalized operator, continuing past the requested
/// count until one has `S^2 = target`. The flag says whether one was found
/// (or none was `required`).
fn highest_weight_pairs<Op, S>(
    op: &Op,
    s2: &S,
    deflation: &VectorSet,
    config: &LanczosConfig,
    target: f64,
    required: bool,
) -> Result<(Eigenpairs, bool)>
where
    Op: LinearOperator + ?Sized,
    S: LinearOperator + ?Sized,
{
    let mut solver = DeflatedLanczos::new(op, Some(deflation), config.clone())?;
    let limit = (config.eigenpairs + HIGHEST_WEIGHT_EXTRA).min(solver.remaining_dim());
    let mut y = vec![0.0; op.dim()];
    let mut hit = !required;
    while solver.found().len() < limit && !(hit && solver.found().len() >= config.eigenpairs) {
        if !solver.next_pair()? {
            break;
        }
        let x = solver.found().vectors.last().expect("a pair was just found");
        s2.apply(x, &mut y);
        // spins differ by at least 2|m| + 2 in S^2, so a loose test is safe
        hit |= (dot(x, &y) - target).abs() < 0.5;
    }
    Ok((solver.into_result(), hit))
}

/// Solves one sector: kernel, deflated eigenpairs and spin labels.
pub fn solve_sector(
    spec: &HamiltonianSpec,
    builder: &VbsBuilder,
    patch: &Patch,
    two_m: i32,
    config: &ScanConfig,
) -> Result<SectorSolution> {
    let started = Instant::now();
    let basis = SectorBasis::new(patch.num_sites(), two_m)?;
    if basis.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "sector 2m = {two_m} is empty for {} sites",
            patch.num_sites()
        )));
    }
    let kernel = kernel_basis_with(builder, patch, &basis)?;
    let h = spec.on(&basis);
    let s2 = TotalSpinSquared::new(&basis)?;
    let kernel_residual = config.check_kernel.then(|| kernel_residual(&h, &kernel.vectors));

    let mut lanczos = config.lanczos.clone();
    lanczos.eigenpairs = lanczos.eigenpairs.min(basis.dim() - kernel.len());
    let mut used_penalty = None;
    let mut pairs = if lanczos.eigenpairs == 0 {
        Eigenpairs {
            deflation_size: kernel.len(),
            ..Default::default()
        }
    } else {
        match config.resolution {
            SpinResolution::Lowest => lanczos_smallest(&h, Some(&kernel.vectors), &lanczos)?,
            SpinResolution::HighestWeight { penalty } => {
                if !(penalty > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "spin penalty must be positive, got {penalty}"
                    )));
                }
                let m = two_m.unsigned_abs() as f64 / 2.0;
                let shift = m * (m + 1.0);
                // multiplets with J = |m| outside the kernel
                let n = patch.num_sites();
                let top = two_m.abs() + 2;
                let excited = (sector_dimension(n, two_m) - sector_dimension(n, top))
                    - (expected_kernel_dimension(patch, two_m) - expected_kernel_dimension(patch, top));
                let mut lift = penalty;
                let mut matvecs = 0;
                let mut attempt = 0;
                loop {
                    let mu = lift / (2.0 * (m + 1.0));
                    let op = FnOperator::new(basis.dim(), |x: &[f64], y: &mut [f64]| {
                        let mut t = vec![0.0; x.len()];
                        s2.apply(x, &mut t);
                        h.apply(x, y);
                        for i in 0..y.len() {
                            y[i] += mu * (t[i] - shift * x[i]);
                        }
                    });
                    let (mut pairs, hit) =
                        highest_weight_pairs(&op, &s2, &kernel.vectors, &lanczos, shift, excited > 0)?;
                    matvecs += pairs.matvecs;
                    if hit {
                        pairs.matvecs = matvecs;
                        used_penalty = Some(lift);
                        break pairs;
                    }
                    attempt += 1;
                    if attempt == PENALTY_ATTEMPTS {
                        return Err(Error::InvalidParameter(format!(
                            "no state with J = {m} among the lowest pairs up to penalty {lift}"
                        )));
                    }
                    lift *= 4.0;
                }
            }
        }
    };
    let (s2_values, spins) = classify_spins(&h, &s2, &mut pairs)?;
    let extra_zero_modes = pairs.values.iter().filter(|&&e| e < ZERO_MODE_TOLERANCE).count();

    let spectrum = SpectrumResult {
        two_m,
        dimension: basis.dim(),
        eigenvalues: pairs.values.clone(),
        s2: s2_values,
        spins,
        residuals: pairs.residuals.clone(),
        deflation_size: kernel.len(),
        expected_kernel: expected_kernel_dimension(patch, two_m),
        kernel_residual,
        extra_zero_modes,
        penalty: used_penalty,
        matvecs: pairs.matvecs,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok(SectorSolution {
        spectrum,
        kernel,
        eigenvectors: pairs.vectors,
    })
}

/// Lowest excitation energy with total spin `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub j: f64,
    pub delta: f64,
    pub source_sector: i32,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub entries: Vec<GapEntry>,
    /// Smallest `Delta(J)`; `None` if no excitation was found.
    pub gamma: Option<f64>,
    pub gamma_j: Option<f64>,
}

impl GapTable {
    /// Merges classified energies from all spectra, one entry per `J`.
    ///
    /// A multiplet shows up in every sector `|m| <= J`; entries agreeing to
    /// within `1e-9` are the same level and the highest-weight sector wins.
    pub fn from_spectra(spectra: &[SpectrumResult]) -> Self {
        let mut best: BTreeMap<u32, GapEntry> = BTreeMap::new();
        for s in spectra {
            for k in 0..s.eigenvalues.len() {
                let e = s.eigenvalues[k];
                if e < ZERO_MODE_TOLERANCE {
                    continue;
                }
                let j = s.spins[k];
                let key = (2.0 * j).round() as u32;
                let candidate = GapEntry {
                    j,
                    delta: e,
                    source_sector: s.two_m,
                    residual: s.residuals[k],
                };
                let replace = match best.get(&key) {
                    None => true,
                    Some(old) => {
                        if (e - old.delta).abs() <= 1e-9 {
                            s.two_m.unsigned_abs() > old.source_sector.unsigned_abs()
                        } else {
                            e < old.delta
                        }
                    }
                };
                if replace {
                    best.insert(key, candidate);
                }
            }
        }
        let entries: Vec<GapEntry> = best.into_values().collect();
        let min = entries.iter().fold(None::<&GapEntry>, |acc, e| match acc {
            Some(a) if a.delta <= e.delta => Some(a),
            _ => Some(e),
        });
        Self {
            gamma: min.map(|e| e.delta),
            gamma_j: min.map(|e| e.j),
            entries,
        }
    }

    pub fn get(&self, j: f64) -> Option<&GapEntry> {
        self.entries.iter().find(|e| (e.j - j).abs() < 0.25)
    }

    /// Delimiter-separated `(J, Delta, source_sector, residual)` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("J,Delta,source_sector,residual\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:.15e},{},{:.3e}\n",
                e.j, e.delta, e.source_sector, e.residual
            ));
        }
        out
    }
}

/// Delimiter-separated `(two_m, index, eigenvalue, J, residual)` rows.
pub fn spectra_csv(spectra: &[SpectrumResult]) -> String {
    let mut out = String::from("two_m,index,eigenvalue,J,residual\n");
    for s in spectra {
        for k in 0..s.eigenvalues.len() {
            out.push_str(&format!(
                "{},{},{:.15e},{},{:.3e}\n",
                s.two_m, k, s.eigenvalues[k], s.spins[k], s.residuals[k]
            ));
        }
    }
    out
}

/// Non-empty sectors `two_m >= 0` of a patch, highest first.
pub fn all_sectors(patch: &Patch) -> Vec<i32> {
    let n = patch.num_sites() as i32;
    (0..=3 * n).rev().filter(|t| (t - 3 * n) % 2 == 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub spectra: Vec<SpectrumResult>,
    pub table: GapTable,
}

/// Solves every requested sector and aggregates the gap table.
///
/// Sectors are processed in the given order; each one already uses all
/// threads internally. Failures carry the sector label.
pub fn sector_gap_scan(patch: &Patch, sectors: &[i32], config: &ScanConfig) -> Result<GapScan> {
    sector_gap_scan_with(patch, sectors, config, |_| {})
}

/// As [`sector_gap_scan`], calling `progress` after every sector.
pub fn sector_gap_scan_with(
    patch: &Patch,
    sectors: &[i32],
    config: &ScanConfig,
    progress: impl FnMut(&SpectrumResult),
) -> Result<GapScan> {
    let scan = scan_sectors(patch, sectors, config, true, progress)?;
    match scan.failures.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(GapScan {
            spectra: scan.spectra,
            table: scan.table,
        }),
    }
}

/// A scan that kept going past failed sectors.
#[derive(Debug, Clone, Serialize)]
pub struct PartialScan {
    pub spectra: Vec<SpectrumResult>,
    /// Built from the sectors that succeeded only.
    pub table: GapTable,
    pub failures: Vec<(i32, String)>,
}

/// Like [`sector_gap_scan_with`] but records per-sector failures instead of
/// stopping at the first one. Setup errors are still returned directly.
pub fn sector_scan_partial(
    patch: &Patch,
    sectors: &[i32],
    config: &ScanConfig,
    progress: impl FnMut(&SpectrumResult),
) -> Result<PartialScan> {
    let scan = scan_sectors(patch, sectors, config, false, progress)?;
    Ok(PartialScan {
        spectra: scan.spectra,
        table: scan.table,
        failures: scan.failures.into_iter().map(|(t, e)| (t, e.to_string())).collect(),
    })
}

struct RawScan {
    spectra: Vec<SpectrumResult>,
    table: GapTable,
    failures: Vec<(i32, Error)>,
}

fn scan_sectors(
    patch: &Patch,
    sectors: &[i32],
    config: &ScanConfig,
    stop_on_failure: bool,
    mut progress: impl FnMut(&SpectrumResult),
) -> Result<RawScan> {
    if sectors.is_empty() {
        return Err(Error::InvalidParameter("no sectors selected".into()));
    }
    config.lanczos.validate()?;
    let spec = HamiltonianSpec::new(patch, projector_spin3_polynomial());
    let builder = VbsBuilder::new(patch, DEFAULT_CONTRACTION_BUDGET)?;
    let mut ordered = sectors.to_vec();
    ordered.sort_by_key(|&t| std::cmp::Reverse(t));
    ordered.dedup();
    let mut spectra = Vec::with_capacity(ordered.len());
    let mut failures = Vec::new();
    for &two_m in &ordered {
        match solve_sector(&spec, &builder, patch, two_m, config) {
            Ok(solution) => {
                progress(&solution.spectrum);
                spectra.push(solution.spectrum);
            }
            Err(e) => {
                failures.push((two_m, e.in_sector(two_m)));
                if stop_on_failure {
                    break;
                }
            }
        }
    }
    let table = GapTable::from_spectra(&spectra);
    Ok(RawScan {
        spectra,
        table,
        failures,
    })
}
