//! Dense vector kernels and the operator abstraction shared by the solvers.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows processed per block in the blocked multi-vector kernels.
const BLOCK: usize = 4096;
const PAR_THRESHOLD: usize = 1 << 15;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// dense symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::DenseEigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

/// A real symmetric operator applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let col = self.column(j);
                for i in 0..n {
                    y[i] += col[i] * xj;
                }
            }
        }
    }
}

fn dot_serial(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < PAR_THRESHOLD {
        return dot_serial(a, b);
    }
    a.par_chunks(BLOCK)
        .zip(b.par_chunks(BLOCK))
        .map(|(x, y)| dot_serial(x, y))
        .sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if y.len() < PAR_THRESHOLD {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
        return;
    }
    y.par_chunks_mut(BLOCK)
        .zip(x.par_chunks(BLOCK))
        .for_each(|(ys, xs)| ys.iter_mut().zip(xs).for_each(|(yi, xi)| *yi += alpha * xi));
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Normalizes in place and returns the previous norm.
pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(1.0 / n, x);
    }
    n
}

/// A set of equal-length vectors stored contiguously, one after another.
///
/// Multi-vector kernels sweep the rows in blocks so that every stored
/// vector is streamed from memory once per operation.
#[derive(Debug, Clone, Default)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f64>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, count: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * count),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim, "vector length does not match set dimension");
        self.data.extend_from_slice(v);
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn truncate(&mut self, count: usize) {
        self.data.truncate(count * self.dim);
    }

    /// Overlaps `<v_k, w>` for every stored vector.
    pub fn dots(&self, w: &[f64]) -> Vec<f64> {
        let k = self.len();
        if k == 0 {
            return Vec::new();
        }
        let dim = self.dim;
        let starts: Vec<usize> = (0..dim).step_by(BLOCK).collect();
        let partial = |r0: usize| {
            let r1 = (r0 + BLOCK).min(dim);
            (0..k)
                .map(|j| dot_serial(&self.data[j * dim + r0..j * dim + r1], &w[r0..r1]))
                .collect::<Vec<f64>>()
        };
        starts.par_iter().map(|&r0| partial(r0)).reduce(
            || vec![0.0; k],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        )
    }

    /// `w -= sum_k c_k v_k`
    pub fn subtract_combination(&self, w: &mut [f64], coeffs: &[f64]) {
        let dim = self.dim;
        w.par_chunks_mut(BLOCK).enumerate().for_each(|(b, ws)| {
            let r0 = b * BLOCK;
            for (j, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let v = &self.data[j * dim + r0..j * dim + r0 + ws.len()];
                ws.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        });
    }

    /// Removes the components of `w` along the stored vectors (assumed
    /// orthonormal) and returns the removed coefficients.
    pub fn project_out(&self, w: &mut [f64]) -> Vec<f64> {
        let c = self.dots(w);
        self.subtract_combination(w, &c);
        c
    }

    /// `sum_k c_k v_k`
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.get(j), &mut out);
            }
        }
        out
    }

    fn block(&self, r0: usize, r1: usize) -> DMatrix<f64> {
        let k = self.len();
        let dim = self.dim;
        DMatrix::from_fn(r1 - r0, k, |i, j| self.data[j * dim + r0 + i])
    }

    /// Gram matrix `G_ij = <v_i, v_j>`.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.len();
        let mut g = DMatrix::<f64>::zeros(k, k);
        if k == 0 {
            return g;
        }
        let mut r0 = 0;
        while r0 < self.dim {
            let r1 = (r0 + BLOCK).min(self.dim);
            let b = self.block(r0, r1);
            g += b.tr_mul(&b);
            r0 = r1;
        }
        g
    }

    /// Replaces the set by `v'_j = sum_i v_i C_ij`, keeping `C.ncols()` vectors.
    pub fn transform(&mut self, c: &DMatrix<f64>) {
        let k = self.len();
        assert_eq!(c.nrows(), k);
        let kept = c.ncols();
        assert!(kept <= k);
        let dim = self.dim;
        let mut r0 = 0;
        while r0 < dim {
            let r1 = (r0 + BLOCK).min(dim);
            let b = self.block(r0, r1) * c;
            for j in 0..kept {
                let dst = &mut self.data[j * dim + r0..j * dim + r1];
                for (i, x) in dst.iter_mut().enumerate() {
                    *x = b[(i, j)];
                }
            }
            r0 = r1;
        }
        self.truncate(kept);
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.gram();
        let k = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Orthonormalizes the set in place by two passes of Gram-matrix
    /// (canonical) orthogonalization.
    ///
    /// Vectors are first scaled to unit norm; eigen-directions of the
    /// normalized Gram matrix with eigenvalue below `rank_tol * max` are
    /// reported as a rank deficiency. Returns the condition number of the
    /// normalized Gram matrix.
    pub fn orthonormalize(&mut self, rank_tol: f64) -> Result<f64> {
        let k = self.len();
        if k == 0 {
            return Ok(1.0);
        }
        let g = self.gram();
        let d: Vec<f64> = (0..k).map(|i| 1.0 / g[(i, i)].sqrt()).collect();
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Kernel("zero vector in orthonormalization".into()));
        }
        let gn = DMatrix::from_fn(k, k, |i, j| g[(i, j)] * d[i] * d[j]);
        let (values, vectors) = symmetric_eigen(&gn)?;
        let max = values[k - 1];
        let min = values[0];
        if min < rank_tol * max {
            let rank = values.iter().filter(|&&x| x >= rank_tol * max).count();
            return Err(Error::Kernel(format!(
                "vectors are linearly dependent: numerical rank {rank} of {k} \
                 (smallest normalized Gram eigenvalue {min:.3e})"
            )));
        }
        let condition = max / min;
        let c = DMatrix::from_fn(k, k, |i, j| d[i] * vectors[(i, j)] / values[j].sqrt());
        self.transform(&c);

        // second pass cleans up the O(condition * eps) residual non-orthogonality
        let g2 = self.gram();
        let (values2, vectors2) = symmetric_eigen(&g2)?;
        let inv_sqrt = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 / values2[i].sqrt() } else { 0.0 });
        let c2 = &vectors2 * inv_sqrt * vectors2.transpose();
        self.transform(&c2);
        Ok(condition)
    }
}
