//! Lanczos iteration on the orthogonal complement of a known subspace.
//!
//! The solver keeps a full, twice-reorthogonalized Krylov basis and stores
//! the projected matrix explicitly, which lets it restart by keeping the
//! lowest Ritz vectors (thick restart) without losing the Lanczos relation.
//! Eigenpairs are extracted one at a time: once the lowest Ritz pair has
//! converged it is locked, i.e. added to the deflated subspace, and a new
//! run starts. Locking recovers every copy of a degenerate eigenvalue, which
//! a single Krylov sequence cannot see.
//!
//! When the Krylov space exhausts the complement (small problems) all Ritz
//! pairs are exact and are returned together; an invariant subspace found
//! earlier is continued with a fresh random direction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, normalize, symmetric_eigen, LinearOperator, VectorSet};

/// Maximum Gram deviation accepted for a deflation basis.
pub const DEFLATION_ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LanczosConfig {
    /// Operator applications allowed per eigenpair.
    pub max_iterations: usize,
    /// Ritz value change and residual estimate (relative to the operator
    /// norm estimate) required before a pair is checked.
    pub tolerance: f64,
    /// Bound on the true residual `|Hv - lambda v|` of an accepted pair.
    pub residual_tolerance: f64,
    /// Number of eigenpairs to return.
    pub eigenpairs: usize,
    /// Krylov basis size that triggers a thick restart.
    pub max_basis: usize,
    /// Ritz vectors kept across a restart.
    pub keep: usize,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-10,
            residual_tolerance: 1e-8,
            eigenpairs: 3,
            max_basis: 64,
            keep: 24,
            seed: 0x5eed,
        }
    }
}

impl LanczosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.residual_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.eigenpairs == 0 {
            return Err(Error::InvalidParameter(
                "at least one eigenpair must be requested".into(),
            ));
        }
        if self.max_basis < 4 || self.keep == 0 || self.keep + 2 > self.max_basis {
            return Err(Error::InvalidParameter(format!(
                "restart policy needs 4 <= max_basis and 1 <= keep <= max_basis - 2, got ({}, {})",
                self.max_basis, self.keep
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Converged eigenpairs in ascending order.
#[derive(Debug, Clone, Default)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub deflation_size: usize,
    pub matvecs: usize,
}

impl Eigenpairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.values = idx.iter().map(|&i| self.values[i]).collect();
        self.residuals = idx.iter().map(|&i| self.residuals[i]).collect();
        let mut vectors = std::mem::take(&mut self.vectors);
        self.vectors = idx.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();
    }
}

enum RunOutcome {
    Converged {
        value: f64,
        vector: Vec<f64>,
        residual: f64,
        /// Further pairs that converged in the same run, ascending.
        extra: Vec<(f64, Vec<f64>, f64)>,
        next_start: Vec<f64>,
    },
    Exhausted {
        values: Vec<f64>,
        vectors: Vec<Vec<f64>>,
        residuals: Vec<f64>,
    },
}

/// Incremental extraction of the lowest eigenpairs on the complement of a
/// deflation subspace.
pub struct DeflatedLanczos<'a, Op: LinearOperator + ?Sized> {
    op: &'a Op,
    deflation: Option<&'a VectorSet>,
    config: LanczosConfig,
    rng: ChaCha8Rng,
    locked: VectorSet,
    found: Eigenpairs,
    pending: Vec<(f64, Vec<f64>, f64)>,
    start: Option<Vec<f64>>,
    norm_estimate: f64,
}

impl<'a, Op: LinearOperator + ?Sized> DeflatedLanczos<'a, Op> {
    pub fn new(op: &'a Op, deflation: Option<&'a VectorSet>, config: LanczosConfig) -> Result<Self> {
        config.validate()?;
        let n = op.dim();
        if let Some(d) = deflation {
            if d.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: d.dim(),
                });
            }
            if d.len() > n {
                return Err(Error::DeflationNotOrthonormal {
                    deviation: f64::INFINITY,
                });
            }
            let deviation = d.orthonormality_defect();
            if deviation > DEFLATION_ORTHONORMALITY_TOLERANCE {
                return Err(Error::DeflationNotOrthonormal { deviation });
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            op,
            deflation,
            config,
            rng,
            locked: VectorSet::new(n),
            found: Eigenpairs {
                deflation_size: deflation.map_or(0, |d| d.len()),
                ..Default::default()
            },
            pending: Vec::new(),
            start: None,
            norm_estimate: 0.0,
        })
    }

    /// Dimension of the space still available for new eigenpairs.
    pub fn remaining_dim(&self) -> usize {
        self.op.dim() - self.found.deflation_size - self.found.len() - self.pending.len()
    }

    pub fn found(&self) -> &Eigenpairs {
        &self.found
    }

    /// Finds the next eigenpair; returns `false` once the complement is exhausted.
    pub fn next_pair(&mut self) -> Result<bool> {
        if !self.pending.is_empty() {
            let (value, vector, residual) = self.pending.remove(0);
            self.accept(value, vector, residual);
            return Ok(true);
        }
        let complement = self.remaining_dim();
        if complement == 0 {
            return Ok(false);
        }
        let start = match self.start.take() {
            Some(s) => s,
            None => self.random_vector(),
        };
        match self.run(start, complement)? {
            RunOutcome::Converged {
                value,
                vector,
                residual,
                extra,
                next_start,
            } => {
                self.accept(value, vector, residual);
                self.pending = extra;
                let mut s = self.random_vector();
                normalize(&mut s);
                if norm(&next_start) > 0.0 {
                    axpy(1.0, &next_start, &mut s);
                }
                self.start = Some(s);
            }
            RunOutcome::Exhausted {
                values,
                vectors,
                residuals,
            } => {
                let mut all: Vec<_> = values
                    .into_iter()
                    .zip(vectors)
                    .zip(residuals)
                    .map(|((v, x), r)| (v, x, r))
                    .collect();
                let (value, vector, residual) = all.remove(0);
                self.accept(value, vector, residual);
                self.pending = all;
            }
        }
        Ok(true)
    }

    fn accept(&mut self, value: f64, vector: Vec<f64>, residual: f64) {
        self.locked.push(&vector);
        self.found.values.push(value);
        self.found.vectors.push(vector);
        self.found.residuals.push(residual);
    }

    pub fn into_result(mut self) -> Eigenpairs {
        self.found.sort();
        self.found
    }

    fn random_vector(&mut self) -> Vec<f64> {
        (0..self.op.dim()).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    fn project_constraints(&self, w: &mut [f64]) {
        if let Some(d) = self.deflation {
            d.project_out(w);
        }
        if !self.locked.is_empty() {
            self.locked.project_out(w);
        }
    }

    /// Orthogonalizes against constraints and the basis; returns the basis
    /// coefficients removed.
    fn orthogonalize(&self, basis: &VectorSet, w: &mut [f64]) -> Vec<f64> {
        // the first basis pass removes O(|H|) coefficients and leaks that
        // much times the basis' own constraint overlap back in; the
        // constraint pass sits after it so the leak is removed before the
        // vector is normalized, and the second basis pass only moves w by
        // roundoff. Skipping the constraint pass on some steps is not safe:
        // zero modes below the wanted level grow back within a few dozen
        // steps.
        let mut h = basis.project_out(w);
        self.project_constraints(w);
        let h2 = basis.project_out(w);
        h.iter_mut().zip(&h2).for_each(|(a, b)| *a += b);
        h
    }

    fn fresh_direction(&mut self, basis: &VectorSet) -> Option<Vec<f64>> {
        for _ in 0..4 {
            let mut w = self.random_vector();
            normalize(&mut w);
            self.orthogonalize(basis, &mut w);
            self.orthogonalize(basis, &mut w);
            if normalize(&mut w) > 1e-8 {
                return Some(w);
            }
        }
        None
    }

    fn true_residual(&mut self, x: &[f64], theta: f64) -> f64 {
        let mut hx = vec![0.0; x.len()];
        self.op.apply(x, &mut hx);
        self.found.matvecs += 1;
        axpy(-theta, x, &mut hx);
        norm(&hx)
    }

    fn run(&mut self, start: Vec<f64>, complement: usize) -> Result<RunOutcome> {
        let n = self.op.dim();
        let cfg = self.config.clone();
        let cap = cfg.max_basis.min(complement);
        let mut basis = VectorSet::with_capacity(n, cap);
        let mut t = DMatrix::<f64>::zeros(cap, cap);

        let mut v = start;
        self.orthogonalize(&basis, &mut v);
        if normalize(&mut v) < 1e-8 {
            v = self
                .fresh_direction(&basis)
                .ok_or_else(|| Error::InvalidParameter("cannot find a start vector".into()))?;
        }
        basis.push(&v);
        drop(v);

        let mut w = vec![0.0; n];
        let mut prev_values: Vec<f64> = Vec::new();
        // with room for the whole complement and every level wanted, skip
        // the one-at-a-time extraction and read all pairs off the full space
        let want_all = cap == complement && self.found.len() + complement <= cfg.eigenpairs;
        let wanted = cfg.eigenpairs.saturating_sub(self.found.len()).max(1);
        let mut iterations = 0usize;
        let mut best_residual = f64::INFINITY;

        loop {
            let j = basis.len() - 1;
            self.op.apply(basis.get(j), &mut w);
            self.found.matvecs += 1;
            iterations += 1;
            let h = self.orthogonalize(&basis, &mut w);
            for (i, &hi) in h.iter().enumerate() {
                t[(i, j)] = hi;
                t[(j, i)] = hi;
            }
            let beta = norm(&w);
            let size = j + 1;
            let exhausted = size >= complement;
            let scale = self.norm_estimate.max(1.0);
            let breakdown = beta <= 1e-12 * scale;
            let full = size == cap;
            let check = size <= 128 || size % 16 == 0 || exhausted || breakdown || full;

            let mut ritz: Option<(Vec<f64>, DMatrix<f64>)> = None;
            if check {
                let (values, vectors) = symmetric_eigen(&t.view((0, 0), (size, size)).into_owned())?;
                let spread = values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                self.norm_estimate = self.norm_estimate.max(spread);
                let scale = self.norm_estimate.max(1.0);

                if exhausted {
                    let mut xs = Vec::with_capacity(size);
                    let mut residuals = Vec::with_capacity(size);
                    for k in 0..size {
                        let coeffs: Vec<f64> = vectors.column(k).iter().copied().collect();
                        let mut x = basis.combine(&coeffs);
                        self.project_constraints(&mut x);
                        normalize(&mut x);
                        residuals.push(self.true_residual(&x, values[k]));
                        xs.push(x);
                    }
                    return Ok(RunOutcome::Exhausted {
                        values,
                        vectors: xs,
                        residuals,
                    });
                }

                let target = (cfg.tolerance * scale).min(0.1 * cfg.residual_tolerance);
                // locked pairs leak their residual into later ones, so converge well
                // below the certificate
                let settled = |k: usize| {
                    beta * vectors[(size - 1, k)].abs() <= target
                        && prev_values
                            .get(k)
                            .is_some_and(|p| (values[k] - p).abs() <= cfg.tolerance * scale)
                };
                best_residual = best_residual.min(beta * vectors[(size - 1, 0)].abs());
                if !want_all && settled(0) {
                    let mut pairs = Vec::new();
                    for k in 0..wanted.min(size - 1) {
                        if k > 0 && !settled(k) {
                            break;
                        }
                        let coeffs: Vec<f64> = vectors.column(k).iter().copied().collect();
                        let mut x = basis.combine(&coeffs);
                        self.project_constraints(&mut x);
                        normalize(&mut x);
                        let residual = self.true_residual(&x, values[k]);
                        if k == 0 {
                            best_residual = best_residual.min(residual);
                        }
                        if residual > cfg.residual_tolerance {
                            break;
                        }
                        pairs.push((values[k], x, residual));
                    }
                    if !pairs.is_empty() {
                        let first = pairs.len();
                        let mut next_start = vec![0.0; n];
                        for k in first..size.min(first + 3) {
                            let coeffs: Vec<f64> = vectors.column(k).iter().copied().collect();
                            axpy(1.0, &basis.combine(&coeffs), &mut next_start);
                        }
                        normalize(&mut next_start);
                        let (value, vector, residual) = pairs.remove(0);
                        return Ok(RunOutcome::Converged {
                            value,
                            vector,
                            residual,
                            extra: pairs,
                            next_start,
                        });
                    }
                }
                prev_values = values.clone();
                ritz = Some((values, vectors));
            }

            if iterations >= cfg.max_iterations {
                return Err(Error::NotConverged {
                    iterations,
                    best_residual,
                });
            }

            let next = if breakdown {
                match self.fresh_direction(&basis) {
                    Some(d) => d,
                    None => {
                        return Err(Error::NotConverged {
                            iterations,
                            best_residual,
                        })
                    }
                }
            } else {
                let mut d = std::mem::take(&mut w);
                crate::linalg::scale(1.0 / beta, &mut d);
                d
            };

            if full {
                let (values, vectors) = match ritz {
                    Some(r) => r,
                    None => symmetric_eigen(&t.view((0, 0), (size, size)).into_owned())?,
                };
                let keep = cfg.keep.min(size - 1);
                let c = vectors.columns(0, keep).into_owned();
                basis.transform(&c);
                t.fill(0.0);
                for (k, &value) in values.iter().take(keep).enumerate() {
                    t[(k, k)] = value;
                }
            }
            basis.push(&next);
            w = next;
        }
    }
}

/// Lowest `config.eigenpairs` eigenpairs of `op` on the orthogonal
/// complement of `deflation`.
pub fn lanczos_smallest<Op: LinearOperator + ?Sized>(
    op: &Op,
    deflation: Option<&VectorSet>,
    config: &LanczosConfig,
) -> Result<Eigenpairs> {
    let mut solver = DeflatedLanczos::new(op, deflation, config.clone())?;
    let want = config.eigenpairs.min(solver.remaining_dim());
    while solver.found().len() < want {
        if !solver.next_pair()? {
            break;
        }
    }
    Ok(solver.into_result())
}

/// Rayleigh quotient `<v, A v> / <v, v>`.
pub fn rayleigh_quotient<Op: LinearOperator + ?Sized>(op: &Op, v: &[f64]) -> f64 {
    let mut y = vec![0.0; v.len()];
    op.apply(v, &mut y);
    dot(v, &y) / dot(v, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::FnOperator;

    fn diagonal(values: Vec<f64>) -> FnOperator<impl Fn(&[f64], &mut [f64]) + Sync> {
        let n = values.len();
        FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = values[i] * x[i];
            }
        })
    }

    #[test]
    fn diagonal_lowest() {
        let op = diagonal((0..200).map(|i| i as f64).collect());
        let cfg = LanczosConfig {
            eigenpairs: 1,
            ..Default::default()
        };
        let r = lanczos_smallest(&op, None, &cfg).unwrap();
        assert!(r.values[0].abs() < 1e-10);
    }

    #[test]
    fn diagonal_deflated() {
        let n = 200;
        let op = diagonal((0..n).map(|i| i as f64).collect());
        let mut defl = VectorSet::new(n);
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        defl.push(&e0);
        let r = lanczos_smallest(&op, Some(&defl), &LanczosConfig::default()).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-10);
        assert!((r.values[1] - 2.0).abs() < 1e-10);
        assert!((r.values[2] - 3.0).abs() < 1e-10);
        assert!(r.vectors[0][0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_copies_are_found() {
        let mut values: Vec<f64> = (0..300).map(|i| 1.0 + i as f64 * 0.05).collect();
        values[7] = 0.5;
        values[100] = 0.5;
        values[250] = 0.5;
        let op = diagonal(values);
        let cfg = LanczosConfig {
            eigenpairs: 4,
            max_basis: 20,
            keep: 6,
            ..Default::default()
        };
        let r = lanczos_smallest(&op, None, &cfg).unwrap();
        for k in 0..3 {
            assert!((r.values[k] - 0.5).abs() < 1e-10, "{:?}", r.values);
        }
        assert!((r.values[3] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn small_space_is_exhausted_exactly() {
        let op = diagonal(vec![3.0, 1.0, 1.0, 2.0, 5.0]);
        let cfg = LanczosConfig {
            eigenpairs: 5,
            ..Default::default()
        };
        let r = lanczos_smallest(&op, None, &cfg).unwrap();
        let expected = [1.0, 1.0, 2.0, 3.0, 5.0];
        for (a, b) in r.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_orthonormal_deflation() {
        let op = diagonal(vec![1.0; 10]);
        let mut defl = VectorSet::new(10);
        defl.push(&[2.0; 10]);
        assert!(matches!(
            lanczos_smallest(&op, Some(&defl), &LanczosConfig::default()),
            Err(Error::DeflationNotOrthonormal { .. })
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let op = diagonal((0..5000).map(|i| (i as f64).sqrt()).collect());
        let cfg = LanczosConfig {
            max_iterations: 10,
            eigenpairs: 1,
            ..Default::default()
        };
        assert!(matches!(
            lanczos_smallest(&op, None, &cfg),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = LanczosConfig {
            eigenpairs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = LanczosConfig {
            max_basis: 10,
            keep: 9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
