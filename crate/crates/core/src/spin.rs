//! Spin matrices and the two-site total-spin-3 projector.

use nalgebra::DMatrix;

use crate::constants::{PROJECTOR_CONSTANT, PROJECTOR_CUBIC, PROJECTOR_PREFACTOR, PROJECTOR_QUADRATIC};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Local dimension of a spin-3/2 site.
pub const LOCAL_DIM: usize = 4;
const PAIR_DIM: usize = LOCAL_DIM * LOCAL_DIM;

/// Spin matrices in the basis `|s, m>` with `m = s, s-1, ..., -s`.
///
/// `S^y` is not real; it is stored as `sy_imag` with `S^y = i * sy_imag`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub two_s: u32,
    pub sz: DMatrix<f64>,
    pub splus: DMatrix<f64>,
    pub sminus: DMatrix<f64>,
    pub sx: DMatrix<f64>,
    pub sy_imag: DMatrix<f64>,
}

impl SpinOperators {
    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    pub fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    /// `Sx^2 + Sy^2 + Sz^2`.
    pub fn casimir(&self) -> DMatrix<f64> {
        &self.sx * &self.sx - &self.sy_imag * &self.sy_imag + &self.sz * &self.sz
    }
}

/// Spin matrices for spin `s`; `2s` must be a non-negative integer.
pub fn make_spin_operators(s: f64) -> Result<SpinOperators> {
    let two_s = 2.0 * s;
    if !two_s.is_finite() || two_s < 0.0 || (two_s - two_s.round()).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "spin must be a non-negative half-integer, got {s}"
        )));
    }
    Ok(spin_operators(two_s.round() as u32))
}

/// Spin matrices for spin `two_s / 2`.
pub fn spin_operators(two_s: u32) -> SpinOperators {
    let d = two_s as usize + 1;
    let s = two_s as f64 / 2.0;
    let m = |k: usize| s - k as f64;
    let sz = DMatrix::from_fn(d, d, |i, j| if i == j { m(i) } else { 0.0 });
    // <m+1| S+ |m> = sqrt(s(s+1) - m(m+1)); row k-1 is one step above row k.
    let splus = DMatrix::from_fn(d, d, |i, j| {
        if i + 1 == j {
            (s * (s + 1.0) - m(j) * (m(j) + 1.0)).sqrt()
        } else {
            0.0
        }
    });
    let sminus = splus.transpose();
    let sx = (&splus + &sminus) * 0.5;
    let sy_imag = (&sminus - &splus) * 0.5;
    SpinOperators {
        two_s,
        sz,
        splus,
        sminus,
        sx,
        sy_imag,
    }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `S_i . S_j` on two spin-3/2 sites, pair index `a * 4 + b`.
pub fn heisenberg_coupling() -> DMatrix<f64> {
    let s = spin_operators(3);
    kron(&s.sz, &s.sz) + (kron(&s.splus, &s.sminus) + kron(&s.sminus, &s.splus)) * 0.5
}

/// Total spin generators `(Sz, S+, S-)` on a pair of spin-3/2 sites.
pub fn pair_generators() -> [DMatrix<f64>; 3] {
    let s = spin_operators(3);
    let id = DMatrix::<f64>::identity(LOCAL_DIM, LOCAL_DIM);
    [
        kron(&s.sz, &id) + kron(&id, &s.sz),
        kron(&s.splus, &id) + kron(&id, &s.splus),
        kron(&s.sminus, &id) + kron(&id, &s.sminus),
    ]
}

/// The projector onto total spin 3 of two spin-3/2 sites.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteProjector {
    pub matrix: DMatrix<f64>,
}

/// Projector evaluated as a cubic polynomial in `x = S_i . S_j`.
pub fn projector_spin3_polynomial() -> TwoSiteProjector {
    let x = heisenberg_coupling();
    let x2 = &x * &x;
    let x3 = &x2 * &x;
    let id = DMatrix::<f64>::identity(PAIR_DIM, PAIR_DIM);
    let matrix = (x + x2 * PROJECTOR_QUADRATIC + x3 * PROJECTOR_CUBIC + id * PROJECTOR_CONSTANT) * PROJECTOR_PREFACTOR;
    TwoSiteProjector { matrix }
}

/// Scalar version of the projector polynomial.
pub fn projector_polynomial_value(x: f64) -> f64 {
    PROJECTOR_PREFACTOR * (x + PROJECTOR_QUADRATIC * x * x + PROJECTOR_CUBIC * x * x * x + PROJECTOR_CONSTANT)
}

/// Projector assembled from the eigenvectors of `(S_i + S_j)^2` with eigenvalue 12.
pub fn projector_spin3_spectral() -> Result<TwoSiteProjector> {
    let [sz, sp, sm] = pair_generators();
    let casimir = &sz * &sz + (&sp * &sm + &sm * &sp) * 0.5;
    let (values, vectors) = symmetric_eigen(&casimir)?;
    let mut matrix = DMatrix::<f64>::zeros(PAIR_DIM, PAIR_DIM);
    let mut rank = 0;
    for (k, &lambda) in values.iter().enumerate() {
        if (lambda - 12.0).abs() < 1e-8 {
            let v = vectors.column(k);
            matrix += &v * v.transpose();
            rank += 1;
        }
    }
    if rank != 7 {
        return Err(Error::Projector(format!(
            "spin-3 eigenspace has dimension {rank}, expected 7"
        )));
    }
    Ok(TwoSiteProjector { matrix })
}

impl TwoSiteProjector {
    /// Non-zero entries grouped by input pair state, for matrix-free use.
    pub fn transitions(&self, cutoff: f64) -> PairTransitions {
        let mut rows = Vec::with_capacity(PAIR_DIM);
        for col in 0..PAIR_DIM {
            let mut row = Vec::new();
            for out in 0..PAIR_DIM {
                let value = self.matrix[(out, col)];
                if value.abs() > cutoff {
                    row.push(((out / LOCAL_DIM) as u8, (out % LOCAL_DIM) as u8, value));
                }
            }
            rows.push(row);
        }
        PairTransitions { rows }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Plain-text dump: one row per line, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..PAIR_DIM {
            let row: Vec<String> = (0..PAIR_DIM).map(|j| format!("{:.17e}", self.matrix[(i, j)])).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// For each input pair state `(a, b)` (index `a * 4 + b`), the output states
/// `(a', b')` and matrix elements.
#[derive(Debug, Clone)]
pub struct PairTransitions {
    pub rows: Vec<Vec<(u8, u8, f64)>>,
}
